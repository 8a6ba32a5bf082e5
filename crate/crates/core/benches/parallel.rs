//! Sequential vs rayon execution of the two embarrassingly parallel loops:
//! exhaustive enumeration and multi-seed batches.
//!
//! Run with `cargo bench -p truss-mcts`. Without the `parallel` feature both
//! variants take the sequential path.

use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use truss_mcts::harness::run_batch;
use truss_mcts::problem::{CatalogSpec, ProblemFile};
use truss_mcts::{brute_force, DriverConfig, Parallelism, TrussProblem};

fn ten_bar(catalog_prefix: Option<usize>) -> TrussProblem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/benchmarks/ten_bar_case1.json");
    let mut file: ProblemFile = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    if let Some(n) = catalog_prefix {
        let CatalogSpec::List(areas) = &file.catalog else {
            panic!("ten-bar catalog is a list")
        };
        file.catalog = CatalogSpec::List(areas[..n].to_vec());
    }
    file.into_problem().unwrap()
}

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn exhaustive(c: &mut Criterion) {
    // 3^10 designs.
    let problem = ten_bar(Some(3));
    let mut group = c.benchmark_group("brute_force");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| black_box(brute_force(&problem, mode).unwrap()))
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let problem = ten_bar(None);
    let config = DriverConfig {
        budget_scale: 0.25,
        ..DriverConfig::default()
    };
    let seeds: Vec<u64> = (1..=4).collect();
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| black_box(run_batch(&problem, &config, &seeds, mode)))
        });
    }
    group.finish();
}

criterion_group!(benches, exhaustive, batch);
criterion_main!(benches);
