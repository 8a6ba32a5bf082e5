//! Experiment harness: seeded batches, ablations, displacement-limit sweeps
//! and checks of published designs. Every CSV produced here omits wall-clock
//! columns, so reports are reproducible byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{brute_force, optimize, DriverConfig, OptimizationResult, Technique};
use crate::error::{ProblemError, SearchError};
use crate::exec::{self, Parallelism};
use crate::fem::{self, AreaAssignment};
use crate::mcts::Backprop;
use crate::mdp::AlphaMode;
use crate::problem::TrussProblem;

/// Slack when comparing a weight against a reference optimum, kg.
pub const WEIGHT_MATCH_TOL: f64 = 0.01;

/// Default batch seeds.
pub fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

/// Parses `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {spec:?}"))?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| format!("bad seed range {spec:?}"))?;
        if b < a {
            return Err(format!("empty seed range {spec:?}"));
        }
        return Ok((a..=b).collect());
    }
    let seeds = spec
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| format!("bad seed {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err("no seeds".into());
    }
    Ok(seeds)
}

/// Summary statistics of a weight sample. `std_dev` is the population form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightStats {
    pub best: f64,
    pub worst: f64,
    pub mean: f64,
    pub std_dev: f64,
}

impl WeightStats {
    pub fn from_weights(weights: &[f64]) -> Option<Self> {
        if weights.is_empty() {
            return None;
        }
        let n = weights.len() as f64;
        let best = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (weights.iter().sum::<f64>() / n).clamp(best, worst);
        let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            best,
            worst,
            mean,
            std_dev: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: Result<OptimizationResult, String>,
}

impl SeedRun {
    /// Weight of a run that found a feasible design.
    pub fn feasible_weight(&self) -> Option<f64> {
        match &self.outcome {
            Ok(r) if r.feasible_found => Some(r.best_weight),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchReport {
    pub problem: String,
    pub config: DriverConfig,
    pub runs: Vec<SeedRun>,
    /// Over runs that found a feasible design; `None` if there were none.
    pub stats: Option<WeightStats>,
}

pub const BATCH_HEADER: &str = "seed,status,best_kg,rounds,evaluations,areas_mm2";

impl BatchReport {
    pub fn feasible_weights(&self) -> Vec<f64> {
        self.runs.iter().filter_map(SeedRun::feasible_weight).collect()
    }

    /// Number of runs whose result is within [`WEIGHT_MATCH_TOL`] of `target`.
    pub fn hits(&self, target: f64) -> usize {
        self.feasible_weights()
            .iter()
            .filter(|&&w| w <= target + WEIGHT_MATCH_TOL)
            .count()
    }

    pub fn best_run(&self) -> Option<&OptimizationResult> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .filter(|r| r.feasible_found)
            .min_by(|a, b| a.best_weight.total_cmp(&b.best_weight))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BATCH_HEADER);
        out.push('\n');
        for run in &self.runs {
            match &run.outcome {
                Ok(r) => {
                    let areas: Vec<String> = r.best_areas_mm2.iter().map(|a| format!("{a:.2}")).collect();
                    let _ = writeln!(
                        out,
                        "{},{},{:.6},{},{},{}",
                        run.seed,
                        if r.feasible_found { "feasible" } else { "infeasible" },
                        r.best_weight,
                        r.round_count(),
                        r.evaluations,
                        areas.join(" ")
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "{},error: {},,,,", run.seed, e.replace(',', ";"));
                }
            }
        }
        if let Some(s) = &self.stats {
            let _ = writeln!(
                out,
                "# best={:.6} worst={:.6} mean={:.6} std={:.6}",
                s.best, s.worst, s.mean, s.std_dev
            );
        }
        out
    }
}

/// Runs one optimization per seed.
pub fn run_batch(problem: &TrussProblem, config: &DriverConfig, seeds: &[u64], mode: Parallelism) -> BatchReport {
    let runs = exec::map(seeds, mode, |&seed| SeedRun {
        seed,
        outcome: optimize(problem, &config.clone().with_seed(seed)).map_err(|e| e.to_string()),
    });
    let weights: Vec<f64> = runs.iter().filter_map(SeedRun::feasible_weight).collect();
    BatchReport {
        problem: problem.name.clone(),
        config: config.clone(),
        stats: WeightStats::from_weights(&weights),
        runs,
    }
}

/// One configuration of the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AblationCell {
    pub technique: Technique,
    pub backprop: Backprop,
    pub multi_root: bool,
    pub alpha: AlphaMode,
}

impl AblationCell {
    pub const BASELINE: AblationCell = AblationCell {
        technique: Technique::Geometric,
        backprop: Backprop::Best,
        multi_root: true,
        alpha: AlphaMode::MinWeight,
    };

    pub fn config(&self, base: &DriverConfig) -> DriverConfig {
        DriverConfig {
            technique: self.technique,
            backprop: self.backprop,
            multi_root: self.multi_root,
            alpha: self.alpha,
            ..base.clone()
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            if self.multi_root { self.technique.name() } else { "single_root" },
            match self.backprop {
                Backprop::Best => "best",
                Backprop::Average => "average",
            },
            if self.multi_root { "multi" } else { "single" },
            match self.alpha {
                AlphaMode::MinWeight => "alpha_min",
                AlphaMode::MaxWeight => "alpha_max",
            }
        )
    }

    /// The full factorial. Single-root runs ignore the schedule, so they
    /// appear once per backprop/alpha pair.
    pub fn factorial() -> Vec<AblationCell> {
        let mut cells = Vec::new();
        for multi_root in [true, false] {
            for backprop in [Backprop::Best, Backprop::Average] {
                for alpha in [AlphaMode::MinWeight, AlphaMode::MaxWeight] {
                    let techniques: &[Technique] = if multi_root { &Technique::ALL } else { &[Technique::None] };
                    for &technique in techniques {
                        cells.push(AblationCell {
                            technique,
                            backprop,
                            multi_root,
                            alpha,
                        });
                    }
                }
            }
        }
        cells
    }

    /// The cells needed for the ordering checks: each factor varied alone
    /// around the baseline.
    pub fn one_at_a_time() -> Vec<AblationCell> {
        let b = Self::BASELINE;
        let mut cells: Vec<AblationCell> = Technique::ALL
            .iter()
            .map(|&technique| AblationCell { technique, ..b })
            .collect();
        cells.push(AblationCell {
            technique: Technique::None,
            multi_root: false,
            ..b
        });
        cells.push(AblationCell {
            backprop: Backprop::Average,
            ..b
        });
        cells.push(AblationCell {
            alpha: AlphaMode::MaxWeight,
            ..b
        });
        cells
    }
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub cell: AblationCell,
    pub batch: BatchReport,
}

impl AblationRow {
    pub fn median_weight(&self) -> Option<f64> {
        median(&self.batch.feasible_weights())
    }

    pub fn median_evaluations(&self) -> Option<f64> {
        let counts: Vec<f64> = self
            .batch
            .runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|r| r.evaluations as f64)
            .collect();
        median(&counts)
    }

    pub fn best_weight(&self) -> Option<f64> {
        self.batch.stats.map(|s| s.best)
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Outcome of one qualitative comparison. `passed` is `None` when the cells
/// it needs were not run.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderingCheck {
    pub name: &'static str,
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub problem: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
    /// Reference optimum used for hit counting.
    pub target: f64,
}

pub const ABLATION_HEADER: &str =
    "technique,backprop,roots,alpha,best_kg,median_kg,worst_kg,mean_kg,median_evaluations,hits";

impl AblationReport {
    pub fn row(&self, cell: &AblationCell) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.cell == *cell)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(ABLATION_HEADER);
        out.push('\n');
        let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        for row in &self.rows {
            let c = &row.cell;
            let s = row.batch.stats;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.technique.name(),
                if c.backprop == Backprop::Best { "best" } else { "average" },
                if c.multi_root { "multi" } else { "single" },
                if c.alpha == AlphaMode::MinWeight { "min" } else { "max" },
                f(s.map(|s| s.best)),
                f(row.median_weight()),
                f(s.map(|s| s.worst)),
                f(s.map(|s| s.mean)),
                f(row.median_evaluations()),
                row.batch.hits(self.target)
            );
        }
        out
    }

    /// The four qualitative orderings of the ablation study.
    pub fn orderings(&self) -> Vec<OrderingCheck> {
        let base = AblationCell::BASELINE;
        let mut checks = Vec::new();

        let single = AblationCell {
            technique: Technique::None,
            multi_root: false,
            ..base
        };
        checks.push(match (self.row(&base), self.row(&single)) {
            (Some(m), Some(s)) => {
                let (mb, sb) = (m.best_weight(), s.best_weight());
                OrderingCheck {
                    name: "multi-root best <= single-root best",
                    passed: Some(match (mb, sb) {
                        (Some(a), Some(b)) => a <= b + 1e-9,
                        (Some(_), None) => true,
                        _ => false,
                    }),
                    detail: format!("multi {mb:?} single {sb:?}"),
                }
            }
            _ => missing("multi-root best <= single-root best"),
        });

        let techniques = [
            Technique::Geometric,
            Technique::Linear,
            Technique::Step,
            Technique::None,
        ];
        let counts: Option<Vec<f64>> = techniques
            .iter()
            .map(|&technique| {
                self.row(&AblationCell { technique, ..base })
                    .and_then(AblationRow::median_evaluations)
            })
            .collect();
        checks.push(match counts {
            Some(c) => OrderingCheck {
                name: "evaluations geometric < linear < step < none",
                passed: Some(c.windows(2).all(|w| w[0] < w[1])),
                detail: format!(
                    "medians geometric {:.0} linear {:.0} step {:.0} none {:.0}",
                    c[0], c[1], c[2], c[3]
                ),
            },
            None => missing("evaluations geometric < linear < step < none"),
        });

        let average = AblationCell {
            backprop: Backprop::Average,
            ..base
        };
        checks.push(match (self.row(&base), self.row(&average)) {
            (Some(b), Some(a)) => {
                let (hb, ha) = (b.batch.hits(self.target), a.batch.hits(self.target));
                OrderingCheck {
                    name: "best-reward hits optimum on more seeds than average-reward",
                    passed: Some(hb >= 1 && ha < hb),
                    detail: format!("target {:.2} hits best {hb} average {ha}", self.target),
                }
            }
            _ => missing("best-reward hits optimum on more seeds than average-reward"),
        });

        let max_alpha = AblationCell {
            alpha: AlphaMode::MaxWeight,
            ..base
        };
        checks.push(match (self.row(&base), self.row(&max_alpha)) {
            (Some(a), Some(b)) => {
                let (ma, mb) = (a.median_weight(), b.median_weight());
                OrderingCheck {
                    name: "alpha=min median weight below alpha=max",
                    passed: Some(match (ma, mb) {
                        (Some(x), Some(y)) => x < y,
                        (Some(_), None) => true,
                        _ => false,
                    }),
                    detail: format!("min {ma:?} max {mb:?}"),
                }
            }
            _ => missing("alpha=min median weight below alpha=max"),
        });
        checks
    }
}

fn missing(name: &'static str) -> OrderingCheck {
    OrderingCheck {
        name,
        passed: None,
        detail: "cells not run".into(),
    }
}

/// Runs every cell over every seed. `target` defaults to the lightest weight
/// seen in any cell.
pub fn ablation_matrix(
    problem: &TrussProblem,
    base: &DriverConfig,
    cells: &[AblationCell],
    seeds: &[u64],
    target: Option<f64>,
    mode: Parallelism,
) -> AblationReport {
    let pairs: Vec<(AblationCell, u64)> = cells
        .iter()
        .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let mut results = exec::map(&pairs, mode, |&(cell, seed)| {
        optimize(problem, &cell.config(base).with_seed(seed)).map_err(|e| e.to_string())
    })
    .into_iter();
    let rows: Vec<AblationRow> = cells
        .iter()
        .map(|&cell| {
            let runs: Vec<SeedRun> = seeds
                .iter()
                .map(|&seed| SeedRun {
                    seed,
                    outcome: results.next().expect("one result per pair"),
                })
                .collect();
            let weights: Vec<f64> = runs.iter().filter_map(SeedRun::feasible_weight).collect();
            AblationRow {
                cell,
                batch: BatchReport {
                    problem: problem.name.clone(),
                    config: cell.config(base),
                    stats: WeightStats::from_weights(&weights),
                    runs,
                },
            }
        })
        .collect();
    let target = target.unwrap_or_else(|| {
        rows.iter()
            .filter_map(AblationRow::best_weight)
            .fold(f64::INFINITY, f64::min)
    });
    AblationReport {
        problem: problem.name.clone(),
        seeds: seeds.to_vec(),
        rows,
        target,
    }
}

/// How each point of a sweep is solved.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepSolver {
    /// Lightest result over these seeds.
    Optimize { config: DriverConfig, seeds: Vec<u64> },
    /// Exhaustive enumeration; only for small instances.
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub weight_kg: f64,
    /// Largest displacement component magnitude, mm.
    pub max_displacement_mm: f64,
    pub areas_mm2: Vec<f64>,
    pub limit_mm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoSweep {
    /// One entry per limit, in input order; `None` marks a gap.
    pub solutions: Vec<(f64, Option<ParetoPoint>)>,
    /// Non-dominated subset, sorted by weight.
    pub front: Vec<ParetoPoint>,
}

pub const PARETO_HEADER: &str = "limit_mm,weight_kg,max_displacement_mm,on_front,areas_mm2";

impl ParetoSweep {
    pub fn gaps(&self) -> Vec<f64> {
        self.solutions
            .iter()
            .filter(|(_, p)| p.is_none())
            .map(|(l, _)| *l)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(PARETO_HEADER);
        out.push('\n');
        for (limit, point) in &self.solutions {
            match point {
                Some(p) => {
                    let areas: Vec<String> = p.areas_mm2.iter().map(|a| format!("{a:.2}")).collect();
                    let _ = writeln!(
                        out,
                        "{limit},{:.6},{:.6},{},{}",
                        p.weight_kg,
                        p.max_displacement_mm,
                        self.front.contains(p),
                        areas.join(" ")
                    );
                }
                None => {
                    let _ = writeln!(out, "{limit},,,false,");
                }
            }
        }
        out
    }
}

/// Filters to the mutually non-dominated points, sorted by weight.
pub fn non_dominated(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.weight_kg
            .total_cmp(&b.weight_kg)
            .then(a.max_displacement_mm.total_cmp(&b.max_displacement_mm))
    });
    let mut front: Vec<ParetoPoint> = Vec::new();
    for p in sorted {
        let dominated = front.last().is_some_and(|q| q.max_displacement_mm <= p.max_displacement_mm);
        if !dominated {
            front.push(p);
        }
    }
    front
}

/// Solves the weight problem once per displacement limit (mm, symmetric).
pub fn pareto_sweep(
    problem: &TrussProblem,
    limits_mm: &[f64],
    solver: &SweepSolver,
    mode: Parallelism,
) -> Result<ParetoSweep, SearchError> {
    if limits_mm.is_empty() {
        return Err(SearchError::Config("no displacement limits".into()));
    }
    if limits_mm.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(SearchError::Config("displacement limits must be positive".into()));
    }
    if limits_mm.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SearchError::Config("displacement limits must be ascending".into()));
    }
    let mut solutions = Vec::with_capacity(limits_mm.len());
    for &limit in limits_mm {
        let limited = problem.with_limits(problem.limits.with_displacement_bound(limit * 1e-3))?;
        let best = match solver {
            SweepSolver::BruteForce => brute_force(&limited, mode)?.best.map(|(ix, _)| ix),
            SweepSolver::Optimize { config, seeds } => run_batch(&limited, config, seeds, mode)
                .best_run()
                .map(|r| r.best_indices.clone()),
        };
        let point = match best {
            Some(indices) => {
                let design = AreaAssignment::from_indices(&limited, &indices)?;
                let analysis = fem::solve(&limited, &design)?;
                Some(ParetoPoint {
                    weight_kg: analysis.weight_kg,
                    max_displacement_mm: analysis.max_displacement_mm(),
                    areas_mm2: design.areas_mm2(),
                    limit_mm: limit,
                })
            }
            None => None,
        };
        solutions.push((limit, point));
    }
    let found: Vec<ParetoPoint> = solutions.iter().filter_map(|(_, p)| p.clone()).collect();
    Ok(ParetoSweep {
        front: non_dominated(&found),
        solutions,
    })
}

/// A published design, as stored under `docs/golden/`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenDesign {
    #[serde(default)]
    pub problem: Option<String>,
    pub reported_weight_kg: f64,
    pub areas_mm2: Vec<f64>,
}

pub fn load_golden(path: impl AsRef<Path>) -> Result<GoldenDesign, ProblemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoldenReport {
    pub weight_kg: f64,
    pub reported_weight_kg: f64,
    /// `(computed − reported) / reported × 100`.
    pub delta_percent: f64,
    pub max_stress_ratio: f64,
    pub max_displacement_ratio: f64,
    /// `1 − ratio`; positive means slack.
    pub stress_margin: f64,
    pub displacement_margin: f64,
    pub max_displacement_mm: f64,
}

impl GoldenReport {
    pub fn within(&self, percent: f64) -> bool {
        self.delta_percent.abs() <= percent
    }
}

/// Analyses a published design. An infeasible design is an error.
pub fn verify_golden(problem: &TrussProblem, golden: &GoldenDesign) -> Result<GoldenReport, SearchError> {
    let design = AreaAssignment::from_mm2(problem, &golden.areas_mm2)?;
    let analysis = fem::solve(problem, &design)?;
    if !analysis.feasible {
        return Err(SearchError::GoldenInfeasible {
            violation: analysis.violation,
        });
    }
    let stress = analysis.cases.iter().map(|c| c.max_stress_ratio).fold(0.0, f64::max);
    let disp = analysis
        .cases
        .iter()
        .map(|c| c.max_displacement_ratio)
        .fold(0.0, f64::max);
    Ok(GoldenReport {
        weight_kg: analysis.weight_kg,
        reported_weight_kg: golden.reported_weight_kg,
        delta_percent: (analysis.weight_kg - golden.reported_weight_kg) / golden.reported_weight_kg * 100.0,
        max_stress_ratio: stress,
        max_displacement_ratio: disp,
        stress_margin: 1.0 - stress,
        displacement_margin: 1.0 - disp,
        max_displacement_mm: analysis.max_displacement_mm(),
    })
}
