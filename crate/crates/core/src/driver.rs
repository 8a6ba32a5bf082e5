//! Multi-root orchestration.
//!
//! Every round builds a fresh tree rooted at the previous round's final
//! design, with candidate windows of width `β^p` around it. Rounds continue
//! until `θ_max` rounds have failed to improve the incumbent by at least
//! `η_min` percent, or until the hard round cap. The reported optimum is the
//! lightest feasible design found over all rounds.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SearchError;
use crate::exec::{self, Parallelism};
use crate::fem::{self, Workspace};
use crate::mcts::{iteration_budget, Backprop, SearchTree, TraceRecord, DEFAULT_EXPLORATION};
use crate::mdp::{initial_state, AlphaMode, CandidateLists, Environment};
use crate::problem::TrussProblem;

/// Width schedule across rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    /// Constant width.
    None,
    #[default]
    Geometric,
    Linear,
    Step,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::None,
        Technique::Geometric,
        Technique::Linear,
        Technique::Step,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::None => "none",
            Technique::Geometric => "geometric",
            Technique::Linear => "linear",
            Technique::Step => "step",
        }
    }
}

impl std::str::FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Technique::None),
            "geometric" => Ok(Technique::Geometric),
            "linear" => Ok(Technique::Linear),
            "step" => Ok(Technique::Step),
            _ => Err(format!("unknown technique {s:?}")),
        }
    }
}

/// Constants of the width schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub geometric_ratio: f64,
    pub geometric_period: u32,
    pub linear_decrement: u32,
    pub step_decrement: u32,
    pub step_period: u32,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            geometric_ratio: 0.5,
            geometric_period: 3,
            linear_decrement: 2,
            step_decrement: 2,
            step_period: 3,
        }
    }
}

fn make_odd(w: usize) -> usize {
    if w.is_multiple_of(2) {
        w + 1
    } else {
        w
    }
}

/// Candidate window width `β^p` for round `p` (1-based) of a catalog of `b` areas.
pub fn width_schedule(technique: Technique, b: usize, p: u32, params: &ScheduleParams) -> usize {
    assert!(p >= 1, "rounds are numbered from 1");
    let full = make_odd(b);
    let half = if b % 2 == 1 { b / 2 } else { b / 2 + 1 };
    let k = (p - 1) as usize;
    match technique {
        Technique::None => full,
        Technique::Geometric => {
            if p == 1 {
                return full;
            }
            let exp = k.div_ceil(params.geometric_period as usize);
            let phi = full as f64 * params.geometric_ratio.powi(exp as i32);
            make_odd(phi.floor() as usize).max(3)
        }
        Technique::Linear => {
            let start = make_odd(half).max(3);
            if p == 1 {
                return start;
            }
            let zeta = start as i64 - params.linear_decrement as i64 * k as i64;
            make_odd(zeta.max(3) as usize)
        }
        Technique::Step => {
            let start = make_odd(half).max(3);
            if p == 1 {
                return start;
            }
            let steps = k / params.step_period as usize;
            let theta = start as i64 - params.step_decrement as i64 * steps as i64;
            make_odd(theta.max(3) as usize)
        }
    }
}

/// Optimizer configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub technique: Technique,
    pub backprop: Backprop,
    /// `false` runs a single round with constant width and no update process.
    pub multi_root: bool,
    pub alpha: AlphaMode,
    pub exploration: f64,
    pub schedule: ScheduleParams,
    /// Improvement threshold in percent.
    pub eta_min: f64,
    pub theta_max: u32,
    pub max_rounds: u32,
    pub seed: u64,
    /// Multiplier on every iteration budget (1.0 = unscaled).
    pub budget_scale: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            technique: Technique::Geometric,
            backprop: Backprop::Best,
            multi_root: true,
            alpha: AlphaMode::MinWeight,
            exploration: DEFAULT_EXPLORATION,
            schedule: ScheduleParams::default(),
            eta_min: 0.01,
            theta_max: 3,
            max_rounds: 100,
            seed: 1,
            budget_scale: 1.0,
        }
    }
}

impl DriverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let s = &self.schedule;
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return bad("exploration constant must be >= 0");
        }
        if !(self.eta_min > 0.0) {
            return bad("eta_min must be positive");
        }
        if self.theta_max < 1 {
            return bad("theta_max must be >= 1");
        }
        if self.max_rounds < 1 {
            return bad("max_rounds must be >= 1");
        }
        if !(s.geometric_ratio > 0.0 && s.geometric_ratio < 1.0) {
            return bad("geometric ratio must lie in (0, 1)");
        }
        if s.geometric_period == 0 || s.step_period == 0 {
            return bad("schedule periods must be positive");
        }
        if s.linear_decrement == 0 || s.step_decrement == 0 {
            return bad("schedule decrements must be positive");
        }
        if !(self.budget_scale > 0.0 && self.budget_scale.is_finite()) {
            return bad("budget_scale must be positive");
        }
        Ok(())
    }
}

/// Everything needed to run one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundPlan {
    pub round: u32,
    pub width: usize,
    /// Initial design as catalog indices.
    pub initial: Vec<usize>,
    pub lists: CandidateLists,
    /// Iteration cap per layer `0..g`.
    pub budgets: Vec<u64>,
}

impl RoundPlan {
    pub fn new(
        problem: &TrussProblem,
        round: u32,
        width: usize,
        initial: Vec<usize>,
        budget_scale: f64,
    ) -> Self {
        let b = problem.catalog_len();
        let g = problem.group_count();
        let lists = CandidateLists::build(b, &initial, width);
        let budgets = (0..g)
            .map(|l| {
                let j = iteration_budget(l, b, width, g);
                ((j as f64 * budget_scale).ceil() as u64).max(1)
            })
            .collect();
        Self {
            round,
            width,
            initial,
            lists,
            budgets,
        }
    }
}

/// Final design of one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub areas: Vec<usize>,
    pub weight: f64,
    pub feasible: bool,
}

/// Runs the tree search for one round and analyses its final design.
pub fn run_round(
    env: &mut Environment<'_>,
    plan: &RoundPlan,
    config: &DriverConfig,
    rng: &mut ChaCha8Rng,
    trace: Option<&mut Vec<TraceRecord>>,
) -> RoundOutcome {
    let mut tree = SearchTree::new(
        initial_state(plan.round, &plan.initial),
        config.backprop,
        config.exploration,
    );
    let fin = tree.policy_improvement(&plan.lists, env, rng, |l| plan.budgets[l], trace);
    let (weight, feasible) = match env.evaluate(fin.areas()) {
        Ok(e) => (e.weight_kg, e.feasible),
        Err(_) => (
            fem::weight_of(
                env.problem(),
                &fin.areas()
                    .iter()
                    .map(|&h| env.problem().catalog.area(h))
                    .collect::<Vec<_>>(),
            ),
            false,
        ),
    };
    RoundOutcome {
        areas: fin.areas().to_vec(),
        weight,
        feasible,
    }
}

/// `|W − min(S)| / min(S) × 100`.
pub fn improvement_factor(weight: f64, best: f64) -> f64 {
    ((weight - best) / best * 100.0).abs()
}

/// One entry of the convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub width: usize,
    pub budget: u64,
    pub weight: f64,
    pub feasible: bool,
    /// Lightest feasible weight after this round.
    pub best_weight: f64,
    /// Improvement factor in percent; infinite when undefined.
    pub eta: f64,
    pub theta: u32,
    /// Cumulative structural analyses.
    pub evaluations: u64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub seed: u64,
    /// Best design as catalog indices.
    pub best_indices: Vec<usize>,
    pub best_areas_mm2: Vec<f64>,
    pub best_weight: f64,
    /// `false` when no round produced a feasible design; the best fields then
    /// hold the lightest infeasible design.
    pub feasible_found: bool,
    /// Weight with every group at the largest area.
    pub initial_weight: f64,
    pub rounds: Vec<RoundRecord>,
    pub evaluations: u64,
    pub elapsed_seconds: f64,
}

pub const HISTORY_HEADER: &str =
    "round,width,budget,weight_kg,feasible,best_kg,eta_percent,theta,evaluations,elapsed_s";

impl OptimizationResult {
    /// The history list `S`, starting with the all-largest weight.
    pub fn history(&self) -> Vec<f64> {
        std::iter::once(self.initial_weight)
            .chain(self.rounds.iter().map(|r| r.weight))
            .collect()
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Convergence history as CSV. Without timing the output is a pure
    /// function of problem, configuration and seed.
    pub fn history_csv(&self, timing: bool) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        let _ = writeln!(
            out,
            "0,,,{:.6},true,{:.6},,0,0,{}",
            self.initial_weight,
            self.initial_weight,
            if timing { "0.000000" } else { "" }
        );
        for r in &self.rounds {
            let eta = if r.eta.is_finite() {
                format!("{:.6}", r.eta)
            } else {
                String::new()
            };
            let elapsed = if timing {
                format!("{:.6}", r.elapsed_seconds)
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{:.6},{},{},{},{}",
                r.round,
                r.width,
                r.budget,
                r.weight,
                r.feasible,
                r.best_weight,
                eta,
                r.theta,
                r.evaluations,
                elapsed
            );
        }
        out
    }
}

pub fn optimize(problem: &TrussProblem, config: &DriverConfig) -> Result<OptimizationResult, SearchError> {
    optimize_traced(problem, config, None)
}

/// [`optimize`] that also records one trace line per search iteration.
pub fn optimize_traced(
    problem: &TrussProblem,
    config: &DriverConfig,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<OptimizationResult, SearchError> {
    config.validate()?;
    let start = Instant::now();
    let b = problem.catalog_len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut env = Environment::new(problem, config.alpha);

    let top = vec![b - 1; problem.group_count()];
    let (w0, w0_feasible) = match env.evaluate(&top) {
        Ok(e) => (e.weight_kg, e.feasible),
        Err(_) => (fem::max_weight(problem), false),
    };
    let mut best: Option<(Vec<usize>, f64)> = w0_feasible.then(|| (top.clone(), w0));
    let mut lightest_any = (top.clone(), w0);

    let technique = if config.multi_root {
        config.technique
    } else {
        Technique::None
    };
    let rounds_allowed = if config.multi_root { config.max_rounds } else { 1 };

    let mut initial = top;
    let mut theta = 0;
    let mut records = Vec::new();
    for p in 1..=rounds_allowed {
        let width = width_schedule(technique, b, p, &config.schedule);
        let plan = RoundPlan::new(problem, p, width, initial.clone(), config.budget_scale);
        let outcome = run_round(&mut env, &plan, config, &mut rng, trace.as_deref_mut());

        let eta = match (&best, outcome.feasible) {
            (Some((_, incumbent)), true) => improvement_factor(outcome.weight, *incumbent),
            _ => f64::INFINITY,
        };
        if eta < config.eta_min {
            theta += 1;
        }
        if outcome.feasible && best.as_ref().is_none_or(|(_, w)| outcome.weight < *w) {
            best = Some((outcome.areas.clone(), outcome.weight));
        }
        if outcome.weight < lightest_any.1 {
            lightest_any = (outcome.areas.clone(), outcome.weight);
        }
        records.push(RoundRecord {
            round: p,
            width,
            budget: plan.budgets.iter().sum(),
            weight: outcome.weight,
            feasible: outcome.feasible,
            best_weight: best.as_ref().map_or(f64::NAN, |(_, w)| *w),
            eta,
            theta,
            evaluations: env.evaluations(),
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        // An infeasible final design is a poor centre for the next window.
        if outcome.feasible {
            initial = outcome.areas;
        }
        if theta >= config.theta_max {
            break;
        }
    }

    let feasible_found = best.is_some();
    let (best_indices, best_weight) = best.unwrap_or(lightest_any);
    Ok(OptimizationResult {
        seed: config.seed,
        best_areas_mm2: best_indices
            .iter()
            .map(|&h| problem.catalog.area_mm2(h))
            .collect(),
        best_indices,
        best_weight,
        feasible_found,
        initial_weight: w0,
        rounds: records,
        evaluations: env.evaluations(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Designs the exhaustive search will agree to enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// Exhaustive search outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Exhaustive {
    /// Lightest feasible design (catalog indices) and its weight.
    pub best: Option<(Vec<usize>, f64)>,
    pub designs: u64,
    pub feasible_designs: u64,
}

fn decode(mut index: u64, b: usize, g: usize, out: &mut [usize]) {
    for slot in out[..g].iter_mut().rev() {
        *slot = (index % b as u64) as usize;
        index /= b as u64;
    }
}

/// Enumerates every catalog assignment and returns the lightest feasible one.
/// Ties go to the lexicographically smallest area vector.
pub fn brute_force(problem: &TrussProblem, mode: Parallelism) -> Result<Exhaustive, SearchError> {
    let b = problem.catalog_len();
    let g = problem.group_count();
    let designs = (b as f64).powi(g as i32);
    if designs > BRUTE_FORCE_LIMIT as f64 {
        return Err(SearchError::TooLarge {
            designs,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let total = designs as u64;
    // (weight, index) of the best feasible design, plus the feasible count.
    type Acc = (Option<(f64, u64)>, u64);
    let better = |a: Option<(f64, u64)>, b: Option<(f64, u64)>| match (a, b) {
        (Some(x), Some(y)) => Some(if (y.0, y.1) < (x.0, x.1) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    };
    let (best, feasible): Acc = exec::fold_range(
        total,
        mode,
        || (Workspace::new(), vec![0usize; g]),
        |(ws, digits), (acc, count), i| {
            decode(i, b, g, digits);
            match fem::evaluate_indices(problem, digits, ws) {
                Ok(e) if e.feasible => (better(acc, Some((e.weight_kg, i))), count + 1),
                _ => (acc, count),
            }
        },
        |(a, ca), (b2, cb)| (better(a, b2), ca + cb),
        (None, 0),
    );
    Ok(Exhaustive {
        best: best.map(|(w, i)| {
            let mut digits = vec![0; g];
            decode(i, b, g, &mut digits);
            (digits, w)
        }),
        designs: total,
        feasible_designs: feasible,
    })
}
