//! Tree search over the design process.
//!
//! Each iteration runs the usual four steps: UCB selection down to a leaf,
//! expansion of every child of a non-terminal leaf, a uniform random rollout
//! from one new child, and backpropagation to the current search root. Node
//! values are either a running maximum of rollout rewards ([`Backprop::Best`])
//! or the classic mean ([`Backprop::Average`]). After a layer's iteration
//! budget is spent the search descends greedily to the most valuable child and
//! continues from there, keeping that child's subtree.
//!
//! Rollout choices are not part of the tree. For a rewarding rollout the
//! choices are kept with the node it started from; when that node is expanded
//! the matching child inherits the reward and the rest of the choices. The
//! greedy descent can therefore always reach the best design sampled so far.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{CandidateLists, DesignState, Environment};

/// Default exploration constant.
pub const DEFAULT_EXPLORATION: f64 = SQRT_2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backprop {
    /// `V ← max(V, G)`
    #[default]
    Best,
    /// `V = ΣG / n`
    Average,
}

/// Source of the default-policy choices.
pub trait Sampler {
    /// Uniform index in `0..n`.
    fn pick(&mut self, n: usize) -> usize;
}

impl<R: Rng> Sampler for R {
    fn pick(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }
}

/// Scores fully assigned designs.
pub trait TerminalReward {
    fn terminal_reward(&mut self, areas: &[usize]) -> f64;
}

impl TerminalReward for Environment<'_> {
    fn terminal_reward(&mut self, areas: &[usize]) -> f64 {
        Environment::terminal_reward(self, areas)
    }
}

/// Upper confidence bound of a child; unvisited children score `+∞`.
pub fn ucb(value: f64, visits: u64, parent_visits: u64, exploration: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    value + exploration * ((parent_visits as f64).ln() / visits as f64).sqrt()
}

/// `⌈log₁₀(base^exp)⌉`, exact when `base` is a power of ten.
fn ceil_log10_pow(base: usize, exp: usize) -> u64 {
    let mut b = base;
    let mut tens = 0;
    while b >= 10 && b.is_multiple_of(10) {
        b /= 10;
        tens += 1;
    }
    if b == 1 {
        return (tens * exp) as u64;
    }
    (exp as f64 * (base as f64).log10()).ceil() as u64
}

/// Iteration cap for the search rooted at `layer`: `2b⌈log₁₀(β^g)⌉` at the
/// round root and `b⌈log₁₀(β^(g−l))⌉` below it. Never less than 1.
pub fn iteration_budget(layer: usize, catalog_len: usize, width: usize, groups: usize) -> u64 {
    assert!(layer < groups, "layer {layer} out of range for {groups} groups");
    let digits = ceil_log10_pow(width, groups - layer);
    let factor = if layer == 0 { 2 } else { 1 };
    (factor * catalog_len as u64 * digits).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchNode {
    pub parent: Option<usize>,
    /// Index of this node's action in its group's candidate list.
    pub choice: usize,
    pub visits: u64,
    /// Running maximum of rewards backpropagated through the node.
    pub best: f64,
    pub reward_sum: f64,
    /// Backpropagations that started at this node.
    pub rollouts: u64,
    first_child: usize,
    child_count: usize,
    terminal_reward: Option<f64>,
}

impl SearchNode {
    fn new(parent: Option<usize>, choice: usize) -> Self {
        Self {
            parent,
            choice,
            visits: 0,
            best: 0.0,
            reward_sum: 0.0,
            rollouts: 0,
            first_child: 0,
            child_count: 0,
            terminal_reward: None,
        }
    }

    pub fn is_expanded(&self) -> bool {
        self.child_count > 0
    }

    /// State-value estimate under the given backpropagation rule.
    pub fn value(&self, mode: Backprop) -> f64 {
        match mode {
            Backprop::Best => self.best,
            Backprop::Average if self.visits > 0 => self.reward_sum / self.visits as f64,
            Backprop::Average => 0.0,
        }
    }
}

/// One line of the optional iteration trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub round: u32,
    /// Layer of the search root when the iteration ran.
    pub layer: usize,
    /// Iteration number within the round, from 1.
    pub iteration: u64,
    /// Candidate indices chosen from the search root down to the simulated node.
    pub path: Vec<usize>,
    pub reward: f64,
    pub root_value: f64,
}

pub const TRACE_HEADER: &str = "round,layer,iteration,path,reward,root_value";

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        let mut path = String::new();
        for (i, c) in self.path.iter().enumerate() {
            if i > 0 {
                path.push('-');
            }
            let _ = write!(path, "{c}");
        }
        format!(
            "{},{},{},{},{:.12},{:.12}",
            self.round, self.layer, self.iteration, path, self.reward, self.root_value
        )
    }
}

/// Search tree for one round. Nodes live in an arena; re-rooting only moves
/// the root index, so abandoned siblings are simply never visited again.
#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
    root: usize,
    root_state: DesignState,
    backprop: Backprop,
    exploration: f64,
    iterations: u64,
    /// Unexpanded node -> best rollout started below it.
    tails: HashMap<usize, Tail>,
}

#[derive(Clone, Debug, PartialEq)]
struct Tail {
    reward: f64,
    /// Candidate indices, one per remaining layer.
    choices: Vec<usize>,
}

impl SearchTree {
    pub fn new(root_state: DesignState, backprop: Backprop, exploration: f64) -> Self {
        Self {
            nodes: vec![SearchNode::new(None, 0)],
            root: 0,
            root_state,
            backprop,
            exploration,
            iterations: 0,
            tails: HashMap::new(),
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_state(&self) -> &DesignState {
        &self.root_state
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, id: usize) -> std::ops::Range<usize> {
        let n = &self.nodes[id];
        n.first_child..n.first_child + n.child_count
    }

    pub fn backprop(&self) -> Backprop {
        self.backprop
    }

    fn select_child(&self, id: usize) -> usize {
        let parent_visits = self.nodes[id].visits;
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for c in self.children(id) {
            let n = &self.nodes[c];
            let score = ucb(n.value(self.backprop), n.visits, parent_visits, self.exploration);
            if best.is_none() || score > best_score {
                best = Some(c);
                best_score = score;
            }
        }
        best.expect("expanded node has children")
    }

    fn expand(&mut self, id: usize, count: usize) {
        let first = self.nodes.len();
        self.nodes
            .extend((0..count).map(|choice| SearchNode::new(Some(id), choice)));
        let n = &mut self.nodes[id];
        n.first_child = first;
        n.child_count = count;
        if let Some(mut tail) = self.tails.remove(&id) {
            let child = first + tail.choices.remove(0);
            let c = &mut self.nodes[child];
            c.best = c.best.max(tail.reward);
            if tail.choices.is_empty() {
                c.terminal_reward = Some(tail.reward);
            } else {
                self.tails.insert(child, tail);
            }
        }
    }

    fn backpropagate(&mut self, from: usize, reward: f64) {
        self.nodes[from].rollouts += 1;
        let mut cur = from;
        loop {
            let n = &mut self.nodes[cur];
            n.visits += 1;
            n.reward_sum += reward;
            if reward > n.best {
                n.best = reward;
            }
            if cur == self.root {
                break;
            }
            cur = n.parent.expect("non-root node has a parent");
        }
    }

    /// Child of the root with the largest value estimate; ties go to the
    /// lowest candidate index.
    pub fn best_root_child(&self) -> Option<usize> {
        let mut best = None;
        let mut best_value = f64::NEG_INFINITY;
        for c in self.children(self.root) {
            let v = self.nodes[c].value(self.backprop);
            if best.is_none() || v > best_value {
                best = Some(c);
                best_value = v;
            }
        }
        best
    }

    /// Makes a child of the current root the new search root, keeping its subtree.
    pub fn reroot(&mut self, child: usize, lists: &CandidateLists) {
        assert_eq!(self.nodes[child].parent, Some(self.root), "not a root child");
        let group = self.root_state.layer();
        let area = lists.list(group)[self.nodes[child].choice];
        self.root_state.assign_next(area);
        self.root = child;
    }

    /// Runs `iterations` rounds of selection, expansion, simulation and
    /// backpropagation from the current root.
    pub fn run_iterations<E, S>(
        &mut self,
        iterations: u64,
        lists: &CandidateLists,
        env: &mut E,
        sampler: &mut S,
        mut trace: Option<&mut Vec<TraceRecord>>,
    ) where
        E: TerminalReward + ?Sized,
        S: Sampler + ?Sized,
    {
        let mut path = Vec::new();
        for _ in 0..iterations {
            self.iterations += 1;
            path.clear();
            let mut state = self.root_state.clone();
            let mut node = self.root;
            while self.nodes[node].is_expanded() {
                node = self.select_child(node);
                let choice = self.nodes[node].choice;
                state.assign_next(lists.list(state.layer())[choice]);
                path.push(choice);
            }

            let reward = if state.is_terminal() {
                self.terminal_value(node, &state, env)
            } else {
                let count = lists.list(state.layer()).len();
                self.expand(node, count);
                let pick = sampler.pick(count);
                node = self.nodes[node].first_child + pick;
                state.assign_next(lists.list(state.layer())[pick]);
                path.push(pick);
                if state.is_terminal() {
                    self.terminal_value(node, &state, env)
                } else {
                    let mut choices = Vec::with_capacity(state.group_count() - state.layer());
                    while !state.is_terminal() {
                        let list = lists.list(state.layer());
                        let k = sampler.pick(list.len());
                        choices.push(k);
                        state.assign_next(list[k]);
                    }
                    let reward = env.terminal_reward(state.areas());
                    if reward > 0.0 && self.tails.get(&node).is_none_or(|t| reward > t.reward) {
                        self.tails.insert(node, Tail { reward, choices });
                    }
                    reward
                }
            };
            self.backpropagate(node, reward);

            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceRecord {
                    round: self.root_state.round(),
                    layer: self.root_state.layer(),
                    iteration: self.iterations,
                    path: path.clone(),
                    reward,
                    root_value: self.nodes[self.root].value(self.backprop),
                });
            }
        }
    }

    fn terminal_value<E: TerminalReward + ?Sized>(
        &mut self,
        node: usize,
        state: &DesignState,
        env: &mut E,
    ) -> f64 {
        if let Some(r) = self.nodes[node].terminal_reward {
            return r;
        }
        let r = env.terminal_reward(state.areas());
        self.nodes[node].terminal_reward = Some(r);
        r
    }

    /// Alternates layer searches and greedy descent until a terminal state is
    /// reached; returns that final state.
    pub fn policy_improvement<E, S, B>(
        &mut self,
        lists: &CandidateLists,
        env: &mut E,
        sampler: &mut S,
        budget: B,
        mut trace: Option<&mut Vec<TraceRecord>>,
    ) -> DesignState
    where
        E: TerminalReward + ?Sized,
        S: Sampler + ?Sized,
        B: Fn(usize) -> u64,
    {
        while !self.root_state.is_terminal() {
            let layer = self.root_state.layer();
            self.run_iterations(budget(layer).max(1), lists, env, sampler, trace.as_deref_mut());
            let child = self.best_root_child().expect("root expanded by the search");
            self.reroot(child, lists);
        }
        self.root_state.clone()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{HashMap, VecDeque};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mdp::initial_state;

    struct Script(VecDeque<usize>);

    impl Sampler for Script {
        fn pick(&mut self, n: usize) -> usize {
            let v = self.0.pop_front().expect("script exhausted");
            assert!(v < n);
            v
        }
    }

    /// Reward lookup by catalog indices, counting calls.
    struct Table(HashMap<Vec<usize>, f64>, u64);

    impl TerminalReward for Table {
        fn terminal_reward(&mut self, areas: &[usize]) -> f64 {
            self.1 += 1;
            self.0[areas]
        }
    }

    fn table_2x2() -> Table {
        let mut m = HashMap::new();
        m.insert(vec![0, 0], 0.0);
        m.insert(vec![0, 1], 0.6);
        m.insert(vec![1, 0], 0.3);
        m.insert(vec![1, 1], 0.2);
        Table(m, 0)
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb(0.5, 1, 1, SQRT_2), 0.5);
        let v = ucb(0.8, 4, 16, SQRT_2);
        let expected = 0.8 + SQRT_2 * (16f64.ln() / 4.0).sqrt();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 1.977_4).abs() < 1e-3, "{v}");
        assert_eq!(ucb(123.0, 0, 5, SQRT_2), f64::INFINITY);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(iteration_budget(0, 42, 43, 10), 1428);
        assert_eq!(iteration_budget(9, 42, 43, 10), 84);
        assert_eq!(iteration_budget(0, 5, 10, 3), 30);
        assert_eq!(iteration_budget(0, 5, 100, 3), 60);
        assert_eq!(iteration_budget(0, 3, 1, 3), 1);
    }

    #[test]
    fn forced_exploration_visits_each_child_once() {
        let lists = CandidateLists::build(3, &[2], 3);
        let mut env = Table([(vec![0], 0.1), (vec![1], 0.5), (vec![2], 0.2)].into_iter().collect(), 0);
        let mut tree = SearchTree::new(initial_state(1, &[2]), Backprop::Best, SQRT_2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        tree.run_iterations(3, &lists, &mut env, &mut rng, None);
        for c in tree.children(tree.root()) {
            assert_eq!(tree.node(c).visits, 1);
        }
        assert_eq!(tree.node(tree.root()).best, 0.5);
    }

    /// Hand trace, g = 2, two candidates per group, rewards
    /// (0,0)=0, (0,1)=0.6, (1,0)=0.3, (1,1)=0.2.
    ///
    /// it1: root leaf → expand {A=0,B=1}; pick B; rollout picks 0 → (1,0) G=0.3.
    ///      root n=1 V=.3; B n=1 V=.3.
    /// it2: A unvisited → select A (leaf, n=0) → expand {A0,A1}; pick A1 → terminal (0,1) G=.6.
    ///      root n=2 V=.6; A n=1 V=.6; A1 n=1 V=.6.
    /// it3: UCB(A)=.6+√2·√(ln2/1), UCB(B)=.3+same → A; A expanded, A0 unvisited → terminal (0,0) G=0.
    ///      root n=3; A n=2 V=.6; A0 n=1 V=0.
    /// it4: UCB(A)=.6+√2√(ln3/2)=1.648, UCB(B)=.3+√2√(ln3)=1.782 → B; B leaf → expand {B0,B1};
    ///      pick B1 → terminal (1,1) G=.2. root n=4 V=.6; B n=2 V=.3; B1 n=1 V=.2.
    #[test]
    fn hand_traced_four_iterations() {
        let lists = CandidateLists::build(2, &[1, 1], 2);
        let mut env = table_2x2();
        let mut tree = SearchTree::new(initial_state(1, &[1, 1]), Backprop::Best, SQRT_2);
        let mut script = Script(VecDeque::from(vec![1, 0, 1, 1]));
        let mut trace = Vec::new();
        tree.run_iterations(4, &lists, &mut env, &mut script, Some(&mut trace));
        assert!(script.0.is_empty());

        let root = tree.root();
        let kids: Vec<_> = tree.children(root).collect();
        let (a, b) = (kids[0], kids[1]);
        let r = tree.node(root);
        assert_eq!((r.visits, r.best), (4, 0.6));
        assert_eq!((tree.node(a).visits, tree.node(a).best), (2, 0.6));
        assert_eq!((tree.node(b).visits, tree.node(b).best), (2, 0.3));
        let a_kids: Vec<_> = tree.children(a).collect();
        let b_kids: Vec<_> = tree.children(b).collect();
        assert_eq!((tree.node(a_kids[0]).visits, tree.node(a_kids[0]).best), (1, 0.0));
        assert_eq!((tree.node(a_kids[1]).visits, tree.node(a_kids[1]).best), (1, 0.6));
        assert_eq!(tree.node(b_kids[0]).visits, 0);
        // B0 inherits the reward of the first rollout, which passed through it.
        assert_eq!(tree.node(b_kids[0]).best, 0.3);
        assert_eq!((tree.node(b_kids[1]).visits, tree.node(b_kids[1]).best), (1, 0.2));
        assert_eq!(env.1, 4);

        let paths: Vec<_> = trace.iter().map(|t| t.path.clone()).collect();
        assert_eq!(paths, vec![vec![1], vec![0, 1], vec![0, 0], vec![1, 1]]);
        let rewards: Vec<_> = trace.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![0.3, 0.6, 0.0, 0.2]);
        assert_eq!(trace[3].csv_row(), "1,0,4,1-1,0.200000000000,0.600000000000");
    }

    #[test]
    fn terminal_rewards_are_cached_per_node() {
        let lists = CandidateLists::build(2, &[1], 2);
        let mut env = Table([(vec![0], 0.4), (vec![1], 0.9)].into_iter().collect(), 0);
        let mut tree = SearchTree::new(initial_state(1, &[1]), Backprop::Best, SQRT_2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        tree.run_iterations(50, &lists, &mut env, &mut rng, None);
        assert_eq!(env.1, 2);
        assert_eq!(tree.node(tree.root()).visits, 50);
    }

    #[test]
    fn greedy_descent_follows_best_value() {
        let lists = CandidateLists::build(2, &[1, 1], 2);
        let mut env = table_2x2();
        let mut tree = SearchTree::new(initial_state(1, &[1, 1]), Backprop::Best, SQRT_2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fin = tree.policy_improvement(&lists, &mut env, &mut rng, |_| 20, None);
        assert_eq!(fin.areas(), &[0, 1]);
        assert!(fin.is_terminal());
    }

    #[test]
    fn average_mode_uses_mean() {
        let mut n = SearchNode::new(None, 0);
        n.visits = 4;
        n.reward_sum = 1.0;
        n.best = 0.9;
        assert_eq!(n.value(Backprop::Average), 0.25);
        assert_eq!(n.value(Backprop::Best), 0.9);
    }
}
