use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use truss_mcts::driver::{optimize_traced, OptimizationResult};
use truss_mcts::harness::{self, AblationCell, SweepSolver};
use truss_mcts::mcts::{TraceRecord, TRACE_HEADER};
use truss_mcts::{
    brute_force, fem, load_problem, AlphaMode, AreaAssignment, Backprop, DriverConfig, Parallelism,
    SearchError, Technique, TrussProblem,
};

#[derive(Parser)]
#[command(name = "truss-mcts", version, about = "Discrete truss sizing by multi-root Monte Carlo tree search")]
struct Cli {
    /// Write reports (convergence CSV, report CSV, best design) here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seeds and sweep points one at a time.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse one design.
    Solve {
        problem: PathBuf,
        /// JSON list of group areas in mm²; defaults to the largest catalog area.
        #[arg(long)]
        areas: Option<PathBuf>,
        /// Print the per-member and per-node results as CSV.
        #[arg(long)]
        dump_analysis: bool,
    },
    /// Run one seeded optimization.
    Optimize {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write one line per search iteration.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run one optimization per seed and summarise.
    Batch {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1..10")]
        seeds: String,
    },
    /// Compare schedules, backpropagation modes, root modes and reward scaling.
    Ablate {
        problem: PathBuf,
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Vary one factor at a time around the default configuration.
        #[arg(long)]
        quick: bool,
        /// Reference optimum for hit counting, kg.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        budget_scale: f64,
    },
    /// Sweep symmetric displacement limits and report the weight/displacement front.
    Pareto {
        problem: PathBuf,
        /// Comma-separated limits in mm, ascending.
        #[arg(long, value_delimiter = ',', required = true)]
        limits: Vec<f64>,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Enumerate every design instead of searching.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Check a published design against its reported weight.
    Verify {
        problem: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        /// Allowed weight deviation, percent.
        #[arg(long, default_value_t = 0.5)]
        tolerance: f64,
    },
    /// Enumerate every design (small instances only).
    Oracle { problem: PathBuf },
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = TechniqueArg::Geometric)]
    technique: TechniqueArg,
    #[arg(long, value_enum, default_value_t = BackpropArg::Best)]
    backprop: BackpropArg,
    /// One round, constant width, no update process.
    #[arg(long)]
    single_root: bool,
    #[arg(long, value_enum, default_value_t = AlphaArg::Min)]
    alpha: AlphaArg,
    /// Multiplier on every per-layer iteration budget.
    #[arg(long, default_value_t = 1.0)]
    budget_scale: f64,
    #[arg(long, default_value_t = 100)]
    max_rounds: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum TechniqueArg {
    Geometric,
    Linear,
    Step,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackpropArg {
    Best,
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaArg {
    Min,
    Max,
}

impl SearchArgs {
    fn config(&self) -> DriverConfig {
        DriverConfig {
            technique: match self.technique {
                TechniqueArg::Geometric => Technique::Geometric,
                TechniqueArg::Linear => Technique::Linear,
                TechniqueArg::Step => Technique::Step,
                TechniqueArg::None => Technique::None,
            },
            backprop: match self.backprop {
                BackpropArg::Best => Backprop::Best,
                BackpropArg::Average => Backprop::Average,
            },
            multi_root: !self.single_root,
            alpha: match self.alpha {
                AlphaArg::Min => AlphaMode::MinWeight,
                AlphaArg::Max => AlphaMode::MaxWeight,
            },
            budget_scale: self.budget_scale,
            max_rounds: self.max_rounds,
            ..DriverConfig::default()
        }
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    NoSolution(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors are input errors; clap would otherwise exit with 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NoSolution(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path) -> Result<TrussProblem> {
    load_problem(path).with_context(|| format!("loading {}", path.display()))
}

fn write_out(dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn areas_json(areas: &[f64]) -> String {
    let rounded: Vec<f64> = areas.iter().map(|a| (a * 100.0).round() / 100.0).collect();
    serde_json::to_string_pretty(&rounded).expect("plain numbers serialize") + "\n"
}

fn parallelism(cli_sequential: bool) -> Parallelism {
    if cli_sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mode = parallelism(cli.sequential);
    let out = cli.out;
    match cli.command {
        Command::Solve {
            problem,
            areas,
            dump_analysis,
        } => {
            let p = load(&problem)?;
            let design = match areas {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let mm2: Vec<f64> =
                        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                    AreaAssignment::from_mm2(&p, &mm2).map_err(anyhow::Error::from)?
                }
                None => AreaAssignment::uniform(&p, p.catalog_len() - 1),
            };
            let analysis = match fem::solve(&p, &design) {
                Ok(a) => a,
                Err(e) => return Err(Failure::NoSolution(format!("analysis failed: {e}"))),
            };
            println!("weight_kg {:.4}", analysis.weight_kg);
            println!("max_displacement_mm {:.4}", analysis.max_displacement_mm());
            for (k, c) in analysis.cases.iter().enumerate() {
                println!(
                    "case {} stress_ratio {:.6} displacement_ratio {:.6}",
                    k + 1,
                    c.max_stress_ratio,
                    c.max_displacement_ratio
                );
            }
            println!("feasible {}", analysis.feasible);
            let csv = analysis.to_csv(&p, &design);
            if dump_analysis {
                print!("{csv}");
            }
            write_out(&out, "analysis.csv", &csv)?;
            if !analysis.feasible {
                return Err(Failure::NoSolution(format!(
                    "design violates constraints by {:.4}",
                    analysis.violation
                )));
            }
        }
        Command::Optimize {
            problem,
            search,
            seed,
            trace,
        } => {
            let p = load(&problem)?;
            let config = search.config().with_seed(seed);
            let mut records: Vec<TraceRecord> = Vec::new();
            let result = optimize_traced(&p, &config, trace.as_ref().map(|_| &mut records))
                .map_err(anyhow::Error::from)?;
            if let Some(path) = trace {
                let mut text = String::from(TRACE_HEADER);
                text.push('\n');
                for r in &records {
                    text.push_str(&r.csv_row());
                    text.push('\n');
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            print_result(&result);
            write_out(&out, "convergence.csv", &result.history_csv(true))?;
            write_out(&out, "report.csv", &result.history_csv(false))?;
            write_out(&out, "best_areas.json", &areas_json(&result.best_areas_mm2))?;
            if !result.feasible_found {
                return Err(Failure::NoSolution("no feasible design found".into()));
            }
        }
        Command::Batch { problem, search, seeds } => {
            let p = load(&problem)?;
            let seeds = harness::parse_seeds(&seeds).map_err(anyhow::Error::msg)?;
            let report = harness::run_batch(&p, &search.config(), &seeds, mode);
            print!("{}", report.to_csv());
            write_out(&out, "report.csv", &report.to_csv())?;
            match report.best_run() {
                Some(best) => {
                    write_out(&out, "convergence.csv", &best.history_csv(true))?;
                    write_out(&out, "best_areas.json", &areas_json(&best.best_areas_mm2))?;
                }
                None => return Err(Failure::NoSolution("no seed found a feasible design".into())),
            }
        }
        Command::Ablate {
            problem,
            seeds,
            quick,
            target,
            budget_scale,
        } => {
            let p = load(&problem)?;
            let seeds = harness::parse_seeds(&seeds).map_err(anyhow::Error::msg)?;
            let cells = if quick {
                AblationCell::one_at_a_time()
            } else {
                AblationCell::factorial()
            };
            let base = DriverConfig {
                budget_scale,
                ..DriverConfig::default()
            };
            let report = harness::ablation_matrix(&p, &base, &cells, &seeds, target, mode);
            print!("{}", report.to_csv());
            for check in report.orderings() {
                let status = match check.passed {
                    Some(true) => "holds",
                    Some(false) => "fails",
                    None => "skipped",
                };
                println!("# {}: {} ({})", check.name, status, check.detail);
            }
            write_out(&out, "report.csv", &report.to_csv())?;
        }
        Command::Pareto {
            problem,
            limits,
            search,
            seeds,
            exhaustive,
        } => {
            let p = load(&problem)?;
            let solver = if exhaustive {
                SweepSolver::BruteForce
            } else {
                SweepSolver::Optimize {
                    config: search.config(),
                    seeds: harness::parse_seeds(&seeds).map_err(anyhow::Error::msg)?,
                }
            };
            let sweep = harness::pareto_sweep(&p, &limits, &solver, mode).map_err(anyhow::Error::from)?;
            print!("{}", sweep.to_csv());
            write_out(&out, "report.csv", &sweep.to_csv())?;
            if sweep.front.is_empty() {
                return Err(Failure::NoSolution("no limit admits a feasible design".into()));
            }
        }
        Command::Verify {
            problem,
            golden,
            tolerance,
        } => {
            let p = load(&problem)?;
            let g = harness::load_golden(&golden)
                .map_err(anyhow::Error::from)
                .with_context(|| format!("loading {}", golden.display()))?;
            let report = match harness::verify_golden(&p, &g) {
                Ok(r) => r,
                Err(e @ SearchError::GoldenInfeasible { .. }) => return Err(Failure::NoSolution(e.to_string())),
                Err(e) => return Err(Failure::Input(e.into())),
            };
            println!("weight_kg {:.4}", report.weight_kg);
            println!("reported_kg {:.4}", report.reported_weight_kg);
            println!("delta_percent {:.4}", report.delta_percent);
            println!("stress_margin {:.4}", report.stress_margin);
            println!("displacement_margin {:.4}", report.displacement_margin);
            if !report.within(tolerance) {
                return Err(Failure::NoSolution(format!(
                    "weight differs from the reported value by {:.3}% (> {tolerance}%)",
                    report.delta_percent
                )));
            }
        }
        Command::Oracle { problem } => {
            let p = load(&problem)?;
            let ex = brute_force(&p, mode).map_err(anyhow::Error::from)?;
            println!("designs {}", ex.designs);
            println!("feasible_designs {}", ex.feasible_designs);
            match ex.best {
                Some((indices, w)) => {
                    let mm2: Vec<f64> = indices.iter().map(|&h| p.catalog.area_mm2(h)).collect();
                    println!("best_kg {w:.4}");
                    println!("areas_mm2 {}", join(&mm2));
                    write_out(&out, "best_areas.json", &areas_json(&mm2))?;
                }
                None => return Err(Failure::NoSolution("no feasible design exists".into())),
            }
        }
    }
    Ok(())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|a| format!("{a:.2}")).collect::<Vec<_>>().join(" ")
}

fn print_result(r: &OptimizationResult) {
    println!("seed {}", r.seed);
    println!("rounds {}", r.round_count());
    println!("evaluations {}", r.evaluations);
    println!("best_kg {:.4}", r.best_weight);
    println!("feasible {}", r.feasible_found);
    println!("areas_mm2 {}", join(&r.best_areas_mm2));
    println!("elapsed_s {:.3}", r.elapsed_seconds);
}
