//! Discrete truss sizing by Monte Carlo tree search with multiple root nodes.
//!
//! A design assigns one catalog area to every member group. Groups are filled
//! one per layer of a search tree; each round re-roots the search at the
//! previous round's design with a narrower window of candidate areas.
//!
//! ```no_run
//! use truss_mcts::{load_problem, optimize, DriverConfig};
//!
//! let problem = load_problem("docs/benchmarks/ten_bar_case1.json").unwrap();
//! let result = optimize(&problem, &DriverConfig::default()).unwrap();
//! println!("{:.2} kg", result.best_weight);
//! ```

pub mod driver;
pub mod error;
pub mod exec;
pub mod fem;
pub mod harness;
pub mod mcts;
pub mod mdp;
pub mod problem;

pub use driver::{
    brute_force, optimize, optimize_traced, width_schedule, DriverConfig, OptimizationResult,
    RoundRecord, ScheduleParams, Technique,
};
pub use error::{AnalysisError, ProblemError, SearchError};
pub use exec::Parallelism;
pub use fem::{solve, AnalysisResult, AreaAssignment};
pub use mcts::Backprop;
pub use mdp::AlphaMode;
pub use problem::{load_problem, parse_problem, save_problem, Catalog, TrussProblem};
