//! Sequential design process: states are partial area assignments filled in
//! fixed group order, actions pick one group's area from the round's
//! candidate window, and only terminal states earn a reward.

use std::fmt::Write as _;

use log::debug;

use crate::error::{AnalysisError, SearchError};
use crate::fem::{self, AreaAssignment, Workspace};
use crate::problem::TrussProblem;

/// A (partial) design. Groups `0..layer` are assigned; the rest hold the
/// round's initial areas. Areas are zero-based catalog indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DesignState {
    round: u32,
    layer: usize,
    areas: Vec<usize>,
}

impl DesignState {
    pub fn round(&self) -> u32 {
        self.round
    }

    /// Number of assigned groups.
    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    pub fn group_count(&self) -> usize {
        self.areas.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.layer == self.areas.len()
    }

    /// Undetermined flags per group, 1 while a group is still open.
    pub fn flags(&self) -> Vec<u8> {
        (0..self.areas.len()).map(|i| u8::from(i >= self.layer)).collect()
    }

    pub(crate) fn assign_next(&mut self, area: usize) {
        debug_assert!(!self.is_terminal());
        self.areas[self.layer] = area;
        self.layer += 1;
    }

    /// Single-line form `round;flags;areas_mm2` for trace logs.
    pub fn trace_line(&self, problem: &TrussProblem) -> String {
        let mut s = format!("{};", self.round);
        for f in self.flags() {
            let _ = write!(s, "{f}");
        }
        s.push(';');
        for (i, &h) in self.areas.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.2}", problem.catalog.area_mm2(h));
        }
        s
    }
}

/// Root state of a round: nothing assigned, areas at the round's initial design.
pub fn initial_state(round: u32, initial: &[usize]) -> DesignState {
    DesignState {
        round,
        layer: 0,
        areas: initial.to_vec(),
    }
}

/// Per-group candidate windows for one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateLists {
    width: usize,
    lists: Vec<Vec<usize>>,
}

impl CandidateLists {
    /// Windows of `width` consecutive catalog indices centered on each group's
    /// initial area, shifted inward where they would leave the catalog. When
    /// `width >= catalog_len` every list is the whole catalog.
    pub fn build(catalog_len: usize, initial: &[usize], width: usize) -> Self {
        let w = width.clamp(1, catalog_len);
        let half = (width.max(1) - 1) / 2;
        let lists = initial
            .iter()
            .map(|&center| {
                let start = center.saturating_sub(half).min(catalog_len - w);
                (start..start + w).collect()
            })
            .collect();
        Self { width, lists }
    }

    /// Nominal window width for the round.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn list(&self, group: usize) -> &[usize] {
        &self.lists[group]
    }

    pub fn group_count(&self) -> usize {
        self.lists.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// Set `group` to catalog index `area`, the `choice`-th entry of its list.
    Assign { group: usize, choice: usize, area: usize },
    /// The terminal self-transition.
    Stay,
}

pub fn action_space(state: &DesignState, lists: &CandidateLists) -> Vec<Action> {
    if state.is_terminal() {
        return vec![Action::Stay];
    }
    let group = state.layer;
    lists
        .list(group)
        .iter()
        .enumerate()
        .map(|(choice, &area)| Action::Assign { group, choice, area })
        .collect()
}

pub fn apply_action(
    state: &DesignState,
    action: Action,
    lists: &CandidateLists,
) -> Result<DesignState, SearchError> {
    match action {
        Action::Stay if state.is_terminal() => Ok(state.clone()),
        Action::Assign { group, choice, area }
            if !state.is_terminal()
                && group == state.layer
                && lists.list(group).get(choice) == Some(&area) =>
        {
            let mut next = state.clone();
            next.assign_next(area);
            Ok(next)
        }
        _ => Err(SearchError::InvalidAction),
    }
}

/// Normalizer of the terminal reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Weight with every group at the smallest area.
    #[default]
    MinWeight,
    /// Weight with every group at the largest area.
    MaxWeight,
}

impl AlphaMode {
    pub fn alpha(self, problem: &TrussProblem) -> f64 {
        match self {
            AlphaMode::MinWeight => fem::alpha_weight(problem),
            AlphaMode::MaxWeight => fem::max_weight(problem),
        }
    }
}

/// `(α / W)²` for a feasible terminal design, else 0.
pub fn reward_from(alpha: f64, eval: Result<fem::Evaluation, AnalysisError>) -> f64 {
    match eval {
        Ok(e) if e.feasible => (alpha / e.weight_kg).powi(2),
        Ok(_) => 0.0,
        Err(err) => {
            debug!("terminal design rejected: {err}");
            0.0
        }
    }
}

/// Reward of a state; non-terminal states earn 0.
pub fn reward(problem: &TrussProblem, state: &DesignState, alpha: f64) -> f64 {
    if !state.is_terminal() {
        return 0.0;
    }
    let mut ws = Workspace::new();
    reward_from(alpha, fem::evaluate_indices(problem, state.areas(), &mut ws))
}

/// Terminal evaluation context shared by one search: the problem, the reward
/// normalizer, scratch buffers and an analysis counter.
#[derive(Debug)]
pub struct Environment<'p> {
    problem: &'p TrussProblem,
    alpha: f64,
    workspace: Workspace,
    evaluations: u64,
}

impl<'p> Environment<'p> {
    pub fn new(problem: &'p TrussProblem, alpha_mode: AlphaMode) -> Self {
        Self {
            problem,
            alpha: alpha_mode.alpha(problem),
            workspace: Workspace::new(),
            evaluations: 0,
        }
    }

    pub fn problem(&self) -> &'p TrussProblem {
        self.problem
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of structural analyses run so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Reward of a fully assigned design given as catalog indices.
    pub fn terminal_reward(&mut self, areas: &[usize]) -> f64 {
        self.evaluations += 1;
        let eval = fem::evaluate_indices(self.problem, areas, &mut self.workspace);
        reward_from(self.alpha, eval)
    }

    /// Weight and feasibility of a design, counted as one analysis.
    pub fn evaluate(&mut self, areas: &[usize]) -> Result<fem::Evaluation, AnalysisError> {
        self.evaluations += 1;
        fem::evaluate_indices(self.problem, areas, &mut self.workspace)
    }
}

/// Descriptive node and member features of a state.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVectors {
    /// `(x, y, z, Fx, Fy, Fz, Rx, Ry, Rz)` per node, m and kN.
    pub nodes: Vec<[f64; 9]>,
    /// `(H1, H2, L, E, M, X)` per member, with L in m, E in GPa, X in mm².
    pub members: Vec<[f64; 6]>,
}

/// Features of a state under one load case (zero-based). Reactions come from
/// analysing the state's current areas.
pub fn feature_vectors(
    problem: &TrussProblem,
    state: &DesignState,
    load_case: usize,
) -> Result<FeatureVectors, AnalysisError> {
    let design = AreaAssignment::from_indices(problem, state.areas())?;
    let analysis = fem::solve(problem, &design)?;
    let case = &analysis.cases[load_case];
    let mut applied = vec![[0.0; 3]; problem.nodes.len()];
    for f in &problem.load_cases[load_case].forces {
        for x in 0..3 {
            applied[f.node - 1][x] += f.force[x] * 1e-3;
        }
    }
    let nodes = problem
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let r = case.reactions_kn[k];
            let f = applied[k];
            [
                n.coords[0], n.coords[1], n.coords[2], f[0], f[1], f[2], r[0], r[1], r[2],
            ]
        })
        .collect();
    let flags = state.flags();
    let members = problem
        .members
        .iter()
        .map(|m| {
            [
                m.endpoints.0 as f64,
                m.endpoints.1 as f64,
                m.length,
                problem.material.elastic_modulus * 1e-9,
                f64::from(flags[m.group]),
                design.areas()[m.group] * 1e6,
            ]
        })
        .collect();
    Ok(FeatureVectors { nodes, members })
}
