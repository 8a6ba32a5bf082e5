//! Shared fixtures: small random planar trusses and the benchmark files.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use truss_mcts::fem::{self, AreaAssignment};
use truss_mcts::problem::{Limits, LoadCase, Material, MemberSpec, NodalForce, Node3D};
use truss_mcts::{load_problem, Catalog, TrussProblem};

pub fn benchmark(name: &str) -> TrussProblem {
    load_problem(docs_dir().join("benchmarks").join(format!("{name}.json"))).expect("benchmark file loads")
}

pub fn docs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

fn node(id: usize, x: f64, y: f64, fixed: bool) -> Node3D {
    Node3D {
        id,
        coords: [x, y, 0.0],
        support: [fixed; 3],
    }
}

/// A stable planar truss with at most `max_groups` groups and `max_areas`
/// catalog entries. Limits are set so the all-largest design is feasible
/// with some slack, which leaves a nontrivial lighter optimum.
pub fn random_instance(seed: u64, max_groups: usize, max_areas: usize) -> TrussProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(1.0..4.0);
    let h = rng.random_range(1.0..4.0);
    let (nodes, conn, free): (Vec<Node3D>, Vec<(usize, usize)>, Vec<usize>) = match rng.random_range(0..3) {
        0 => (
            vec![
                node(1, 0.0, 0.0, true),
                node(2, w, 0.0, true),
                node(3, rng.random_range(-0.5 * w..1.5 * w), h, false),
            ],
            vec![(1, 3), (2, 3)],
            vec![3],
        ),
        1 => (
            vec![
                node(1, 0.0, 0.0, true),
                node(2, w, 0.0, true),
                node(3, 2.0 * w, 0.0, true),
                node(4, rng.random_range(0.0..2.0 * w), h, false),
            ],
            vec![(1, 4), (2, 4), (3, 4)],
            vec![4],
        ),
        _ => (
            vec![
                node(1, 0.0, 0.0, true),
                node(2, 0.0, h, true),
                node(3, w, h, false),
                node(4, w, 0.0, false),
            ],
            vec![(2, 3), (3, 4), (1, 4), (2, 4)],
            vec![3, 4],
        ),
    };
    let members: Vec<MemberSpec> = conn
        .iter()
        .enumerate()
        .map(|(k, &endpoints)| MemberSpec { id: k + 1, endpoints })
        .collect();

    let g = rng.random_range(1..=max_groups.min(members.len()));
    let mut ids: Vec<usize> = (1..=members.len()).collect();
    ids.shuffle(&mut rng);
    let mut groups: Vec<Vec<usize>> = ids[..g].iter().map(|&m| vec![m]).collect();
    for &m in &ids[g..] {
        let k = rng.random_range(0..g);
        groups[k].push(m);
    }
    for grp in &mut groups {
        grp.sort_unstable();
    }

    let b = rng.random_range(2..=max_areas);
    let mut area = rng.random_range(100.0..1000.0);
    let mut areas = Vec::with_capacity(b);
    for _ in 0..b {
        areas.push((area * 100.0_f64).round() / 100.0);
        area *= rng.random_range(1.3..2.5);
    }
    let catalog = Catalog::from_mm2(&areas).expect("ascending catalog");

    let forces = free
        .iter()
        .map(|&n| {
            let mag = rng.random_range(10e3..100e3);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            NodalForce {
                node: n,
                force: [mag * angle.cos(), mag * angle.sin(), 0.0],
            }
        })
        .collect();
    let material = Material {
        density: 2770.0,
        elastic_modulus: 70e9,
    };
    let loose = Limits {
        stress_min: -1e15,
        stress_max: 1e15,
        displacement_min: -1e6,
        displacement_max: 1e6,
    };
    let draft = TrussProblem::new(
        format!("random_{seed}"),
        true,
        nodes,
        members,
        groups,
        vec![LoadCase { forces }],
        material,
        loose,
        catalog,
    )
    .expect("valid random truss");

    let top = AreaAssignment::uniform(&draft, draft.catalog_len() - 1);
    let res = fem::solve(&draft, &top).expect("stable random truss");
    let sigma = res.cases[0].stresses_mpa.iter().fold(0.0_f64, |m, s| m.max(s.abs())) * 1e6;
    let delta = res.max_displacement_mm() * 1e-3;
    let limits = Limits {
        stress_min: -sigma * rng.random_range(1.05..4.0),
        stress_max: sigma * rng.random_range(1.05..4.0),
        displacement_min: -delta * rng.random_range(1.05..4.0),
        displacement_max: delta * rng.random_range(1.05..4.0),
    };
    draft.with_limits(limits).expect("positive limits")
}

/// Relative equilibrium residual `‖K u − f‖ / ‖f‖` of every load case.
pub fn equilibrium_residuals(problem: &TrussProblem, design: &AreaAssignment) -> Vec<f64> {
    let k = fem::assemble_stiffness(problem, design);
    let res = fem::solve(problem, design).expect("stable design");
    let dofs = problem.dofs();
    let index_of = |id: usize| problem.nodes.iter().position(|n| n.id == id).expect("load node exists");
    problem
        .load_cases
        .iter()
        .zip(&res.cases)
        .map(|(case, out)| {
            let n = dofs.free_count();
            let mut f = vec![0.0; n];
            for force in &case.forces {
                for axis in 0..3 {
                    if let Some(eq) = dofs.equation(index_of(force.node), axis) {
                        f[eq] += force.force[axis];
                    }
                }
            }
            let u: Vec<f64> = (0..n)
                .map(|eq| {
                    let (node, axis) = dofs.owner(eq);
                    out.displacements_mm[node][axis] * 1e-3
                })
                .collect();
            let ku = k.mul_vec(&u);
            let num: f64 = ku.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            num / den.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Largest component of `Σ reactions + Σ applied loads`, kN, over load cases.
pub fn force_balance(problem: &TrussProblem, design: &AreaAssignment) -> f64 {
    let res = fem::solve(problem, design).expect("stable design");
    let mut worst = 0.0_f64;
    for (case, out) in problem.load_cases.iter().zip(&res.cases) {
        let mut total = [0.0; 3];
        for r in &out.reactions_kn {
            for a in 0..3 {
                total[a] += r[a];
            }
        }
        for force in &case.forces {
            for a in 0..3 {
                total[a] += force.force[a] * 1e-3;
            }
        }
        worst = total.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    worst
}
