mod common;

use truss_mcts::driver::{brute_force, DriverConfig};
use truss_mcts::error::SearchError;
use truss_mcts::fem::{self, AreaAssignment};
use truss_mcts::harness::{
    ablation_matrix, load_golden, non_dominated, pareto_sweep, run_batch, verify_golden, AblationCell, GoldenDesign,
    ParetoPoint, SweepSolver, BATCH_HEADER,
};
use truss_mcts::Parallelism;

#[test]
fn batch_stats_match_the_runs() {
    let p = common::random_instance(7, 3, 5);
    let report = run_batch(&p, &DriverConfig::default(), &[1, 2, 3, 4], Parallelism::Sequential);
    assert_eq!(report.runs.len(), 4);
    let w = report.feasible_weights();
    assert_eq!(w.len(), 4);
    let mean = w.iter().sum::<f64>() / 4.0;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
    let s = report.stats.unwrap();
    assert!((s.mean - mean).abs() < 1e-9);
    assert!((s.std_dev - var.sqrt()).abs() < 1e-9);
    assert_eq!(s.best, w.iter().cloned().fold(f64::INFINITY, f64::min));
    assert_eq!(s.worst, w.iter().cloned().fold(0.0, f64::max));

    let csv = report.to_csv();
    assert!(csv.starts_with(BATCH_HEADER));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn parallel_and_sequential_batches_agree() {
    let p = common::random_instance(11, 3, 5);
    let seeds = [5, 6, 7];
    let a = run_batch(&p, &DriverConfig::default(), &seeds, Parallelism::Sequential);
    let b = run_batch(&p, &DriverConfig::default(), &seeds, Parallelism::Parallel);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn brute_force_agrees_across_modes() {
    let p = common::random_instance(3, 3, 5);
    let a = brute_force(&p, Parallelism::Sequential).unwrap();
    let b = brute_force(&p, Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.designs, (p.catalog_len() as u64).pow(p.group_count() as u32));
}

#[test]
fn brute_force_refuses_large_spaces() {
    let p = common::benchmark("ten_bar_case1");
    assert!(brute_force(&p, Parallelism::Sequential).is_err());
}

#[test]
fn pareto_sweep_matches_per_limit_oracle() {
    let p = common::random_instance(21, 3, 5);
    let top = fem::solve(&p, &AreaAssignment::uniform(&p, p.catalog_len() - 1))
        .unwrap()
        .max_displacement_mm();
    let limits: Vec<f64> = [0.5, 1.0, 1.5, 2.5, 4.0].iter().map(|k| k * top).collect();
    let sweep = pareto_sweep(&p, &limits, &SweepSolver::BruteForce, Parallelism::Sequential).unwrap();
    assert_eq!(sweep.solutions.len(), limits.len());
    // Below the all-largest response nothing is feasible.
    assert_eq!(sweep.gaps(), vec![limits[0]]);
    let mut last = f64::INFINITY;
    for (limit, point) in sweep.solutions.iter().skip(1) {
        let point = point.as_ref().unwrap();
        assert!(point.max_displacement_mm <= limit * (1.0 + 1e-9));
        assert!(point.weight_kg <= last + 1e-9);
        last = point.weight_kg;
    }
    for w in sweep.front.windows(2) {
        assert!(w[0].weight_kg < w[1].weight_kg);
        assert!(w[0].max_displacement_mm > w[1].max_displacement_mm);
    }
    assert!(sweep.to_csv().lines().count() == limits.len() + 1);
}

#[test]
fn pareto_sweep_rejects_bad_limits() {
    let p = common::random_instance(1, 3, 5);
    for bad in [vec![], vec![1.0, 1.0], vec![2.0, 1.0], vec![-1.0]] {
        assert!(matches!(
            pareto_sweep(&p, &bad, &SweepSolver::BruteForce, Parallelism::Sequential),
            Err(SearchError::Config(_))
        ));
    }
}

#[test]
fn non_dominated_drops_dominated_points() {
    let pt = |w, d| ParetoPoint {
        weight_kg: w,
        max_displacement_mm: d,
        areas_mm2: vec![],
        limit_mm: 0.0,
    };
    let front = non_dominated(&[pt(3.0, 1.0), pt(1.0, 5.0), pt(2.0, 6.0), pt(2.0, 2.0)]);
    let kept: Vec<(f64, f64)> = front.iter().map(|p| (p.weight_kg, p.max_displacement_mm)).collect();
    assert_eq!(kept, vec![(1.0, 5.0), (2.0, 2.0), (3.0, 1.0)]);
}

#[test]
fn golden_files_verify_and_a_shrunk_design_is_rejected() {
    for name in ["ten_bar_case1", "ten_bar_case2", "seventy_two_bar_case1", "seventy_two_bar_case2"] {
        let p = common::benchmark(name);
        let g = load_golden(common::docs_dir().join(format!("golden/{name}.json"))).unwrap();
        assert_eq!(g.problem.as_deref(), Some(name));
        let r = verify_golden(&p, &g).unwrap();
        assert!(r.within(0.5), "{name}: {}", r.delta_percent);
        assert!(r.stress_margin >= -1e-9 && r.displacement_margin >= -1e-9);
    }
    let p = common::benchmark("ten_bar_case1");
    let smallest = GoldenDesign {
        problem: None,
        reported_weight_kg: 1.0,
        areas_mm2: vec![p.catalog.area_mm2(0); p.group_count()],
    };
    assert!(matches!(
        verify_golden(&p, &smallest),
        Err(SearchError::GoldenInfeasible { violation }) if violation > 0.0
    ));
}

#[test]
fn ablation_cells_are_distinct() {
    let all = AblationCell::factorial();
    assert_eq!(all.len(), 20);
    let mut labels: Vec<String> = all.iter().map(AblationCell::label).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 20);
    for cell in AblationCell::one_at_a_time() {
        assert!(all.contains(&cell));
    }
}

#[test]
fn ablation_report_has_one_row_per_cell() {
    let p = common::random_instance(4, 3, 5);
    let cells = AblationCell::one_at_a_time();
    let report = ablation_matrix(&p, &DriverConfig::default(), &cells, &[1, 2], None, Parallelism::Sequential);
    assert_eq!(report.rows.len(), cells.len());
    let oracle = brute_force(&p, Parallelism::Sequential).unwrap().best.unwrap().1;
    assert!(report.target >= oracle - 1e-9);
    assert_eq!(report.orderings().len(), 4);
    assert!(report.orderings().iter().all(|c| c.passed.is_some()));
    assert_eq!(report.to_csv().lines().count(), cells.len() + 1);
}
