//! Linear-elastic truss analysis by the direct stiffness method.
//!
//! Each member contributes `(E A / L) e eᵀ` blocks, with `e` the unit vector
//! from its first to its second node. Stresses are tension-positive:
//! `σ = (E / L) eᵀ (u₂ − u₁)`. Feasibility is the conjunction over all load
//! cases of the two-sided stress and displacement limits.

mod linalg;

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::AnalysisError;
use crate::problem::{TrussProblem, AXES};

/// Ratio slack admitted as roundoff when checking constraints.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// One area per design group, every entry drawn from the problem catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaAssignment {
    indices: Vec<usize>,
    areas: Vec<f64>,
}

impl AreaAssignment {
    /// From zero-based catalog indices.
    pub fn from_indices(problem: &TrussProblem, indices: &[usize]) -> Result<Self, AnalysisError> {
        if indices.len() != problem.group_count() {
            return Err(AnalysisError::DesignLength {
                expected: problem.group_count(),
                found: indices.len(),
            });
        }
        let mut areas = Vec::with_capacity(indices.len());
        for (i, &h) in indices.iter().enumerate() {
            if h >= problem.catalog_len() {
                return Err(AnalysisError::NotInCatalog {
                    group: i + 1,
                    area: f64::NAN,
                });
            }
            areas.push(problem.catalog.area(h));
        }
        Ok(Self {
            indices: indices.to_vec(),
            areas,
        })
    }

    /// From areas in mm², each of which must match a catalog entry.
    pub fn from_mm2(problem: &TrussProblem, areas_mm2: &[f64]) -> Result<Self, AnalysisError> {
        if areas_mm2.len() != problem.group_count() {
            return Err(AnalysisError::DesignLength {
                expected: problem.group_count(),
                found: areas_mm2.len(),
            });
        }
        let indices = areas_mm2
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                problem
                    .catalog
                    .index_of_mm2(a)
                    .ok_or(AnalysisError::NotInCatalog { group: i + 1, area: a })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indices(problem, &indices)
    }

    /// Every group at the same catalog index.
    pub fn uniform(problem: &TrussProblem, index: usize) -> Self {
        Self::from_indices(problem, &vec![index; problem.group_count()])
            .expect("index within catalog")
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Areas in m².
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn areas_mm2(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a * 1e6).collect()
    }
}

/// Dense symmetric stiffness matrix over the free degrees of freedom, N/m.
#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessMatrix {
    pub size: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl StiffnessMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.size)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn assemble_into(problem: &TrussProblem, group_areas: &[f64], k: &mut [f64]) {
    let dofs = problem.dofs();
    let n = dofs.free_count();
    k.fill(0.0);
    let e_mod = problem.material.elastic_modulus;
    for m in &problem.members {
        let stiff = e_mod * group_areas[m.group] / m.length;
        let (a, b) = (m.endpoints.0 - 1, m.endpoints.1 - 1);
        let eqs: [Option<usize>; 6] = [
            dofs.equation(a, 0),
            dofs.equation(a, 1),
            dofs.equation(a, 2),
            dofs.equation(b, 0),
            dofs.equation(b, 1),
            dofs.equation(b, 2),
        ];
        for r in 0..6 {
            let Some(er) = eqs[r] else { continue };
            let (sr, ur) = if r < 3 { (1.0, m.unit[r]) } else { (-1.0, m.unit[r - 3]) };
            for c in 0..6 {
                let Some(ec) = eqs[c] else { continue };
                let (sc, uc) = if c < 3 { (1.0, m.unit[c]) } else { (-1.0, m.unit[c - 3]) };
                k[er * n + ec] += stiff * sr * sc * ur * uc;
            }
        }
    }
}

/// Global stiffness matrix for a design.
pub fn assemble_stiffness(problem: &TrussProblem, design: &AreaAssignment) -> StiffnessMatrix {
    let n = problem.dofs().free_count();
    let mut data = vec![0.0; n * n];
    assemble_into(problem, design.areas(), &mut data);
    StiffnessMatrix { size: n, data }
}

/// Weight `ρ Σ_i A_i Σ_j L_ij` in kg for per-group areas in m².
pub(crate) fn weight_of(problem: &TrussProblem, group_areas: &[f64]) -> f64 {
    problem.material.density
        * group_areas
            .iter()
            .zip(problem.group_lengths())
            .map(|(a, l)| a * l)
            .sum::<f64>()
}

pub fn total_weight(problem: &TrussProblem, design: &AreaAssignment) -> f64 {
    weight_of(problem, design.areas())
}

/// Weight with every group at the smallest catalog area.
pub fn alpha_weight(problem: &TrussProblem) -> f64 {
    total_weight(problem, &AreaAssignment::uniform(problem, 0))
}

/// Weight with every group at the largest catalog area.
pub fn max_weight(problem: &TrussProblem) -> f64 {
    total_weight(
        problem,
        &AreaAssignment::uniform(problem, problem.catalog_len() - 1),
    )
}

/// Per-load-case analysis output, in reporting units.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    /// Per node, mm. Exactly zero at supported components.
    pub displacements_mm: Vec<[f64; 3]>,
    /// Per member, MPa, tension positive.
    pub stresses_mpa: Vec<f64>,
    /// Per node, kN. Zero at unsupported components.
    pub reactions_kn: Vec<[f64; 3]>,
    pub max_stress_ratio: f64,
    pub max_displacement_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisResult {
    pub cases: Vec<CaseResult>,
    pub weight_kg: f64,
    pub feasible: bool,
    /// `max(stress ratio, displacement ratio) − 1` over all cases.
    pub violation: f64,
}

impl AnalysisResult {
    /// Largest displacement component magnitude over all cases, mm.
    pub fn max_displacement_mm(&self) -> f64 {
        self.cases
            .iter()
            .flat_map(|c| c.displacements_mm.iter().flatten())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with one row per member and per node for every load case.
    pub fn to_csv(&self, problem: &TrussProblem, design: &AreaAssignment) -> String {
        let mut out = String::from("kind,id,group,length_m,area_mm2,case,stress_mpa,ux_mm,uy_mm,uz_mm\n");
        for (c, case) in self.cases.iter().enumerate() {
            for (j, m) in problem.members.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "member,{},{},{:.6},{:.2},{},{:.6},,,",
                    m.id,
                    m.group + 1,
                    m.length,
                    design.areas()[m.group] * 1e6,
                    c + 1,
                    case.stresses_mpa[j]
                );
            }
            for (k, u) in case.displacements_mm.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "node,{},,,,{},,{:.6},{:.6},{:.6}",
                    k + 1,
                    c + 1,
                    u[0],
                    u[1],
                    u[2]
                );
            }
        }
        out
    }

    pub fn write_csv(
        &self,
        problem: &TrussProblem,
        design: &AreaAssignment,
        path: impl AsRef<Path>,
    ) -> io::Result<()> {
        std::fs::write(path, self.to_csv(problem, design))
    }
}

fn ratio(value: f64, lo: f64, hi: f64) -> f64 {
    if value >= 0.0 {
        value / hi
    } else {
        value / lo
    }
}

/// Reusable buffers for repeated analyses of one problem.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    k: Vec<f64>,
    u: Vec<f64>,
    areas: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Weight and constraint status of a design, without the full field output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub weight_kg: f64,
    pub max_ratio: f64,
    pub feasible: bool,
}

fn factor(problem: &TrussProblem, group_areas: &[f64], ws: &mut Workspace) -> Result<(), AnalysisError> {
    let n = problem.dofs().free_count();
    ws.k.resize(n * n, 0.0);
    assemble_into(problem, group_areas, &mut ws.k);
    linalg::cholesky_in_place(&mut ws.k, n).map_err(|(eq, pivot)| {
        let (node, axis) = problem.dofs().owner(eq);
        AnalysisError::Unstable {
            node: node + 1,
            axis: AXES[axis],
            pivot,
        }
    })
}

/// Fast feasibility check used by the search; areas are catalog indices.
pub fn evaluate_indices(
    problem: &TrussProblem,
    indices: &[usize],
    ws: &mut Workspace,
) -> Result<Evaluation, AnalysisError> {
    let mut areas = std::mem::take(&mut ws.areas);
    areas.clear();
    areas.extend(indices.iter().map(|&h| problem.catalog.area(h)));
    let out = evaluate_areas(problem, &areas, ws);
    ws.areas = areas;
    out
}

pub(crate) fn evaluate_areas(
    problem: &TrussProblem,
    group_areas: &[f64],
    ws: &mut Workspace,
) -> Result<Evaluation, AnalysisError> {
    factor(problem, group_areas, ws)?;
    let n = problem.dofs().free_count();
    let lim = problem.limits;
    let e_mod = problem.material.elastic_modulus;
    let dofs = problem.dofs();
    let mut max_ratio: f64 = 0.0;
    for rhs in problem.load_vectors() {
        ws.u.clear();
        ws.u.extend_from_slice(rhs);
        linalg::cholesky_solve(&ws.k, n, &mut ws.u);
        for &d in &ws.u {
            max_ratio = max_ratio.max(ratio(d, lim.displacement_min, lim.displacement_max));
        }
        for m in &problem.members {
            let (a, b) = (m.endpoints.0 - 1, m.endpoints.1 - 1);
            let mut elong = 0.0;
            for axis in 0..3 {
                let ub = dofs.equation(b, axis).map_or(0.0, |e| ws.u[e]);
                let ua = dofs.equation(a, axis).map_or(0.0, |e| ws.u[e]);
                elong += m.unit[axis] * (ub - ua);
            }
            let sigma = e_mod / m.length * elong;
            max_ratio = max_ratio.max(ratio(sigma, lim.stress_min, lim.stress_max));
        }
    }
    Ok(Evaluation {
        weight_kg: weight_of(problem, group_areas),
        max_ratio,
        feasible: max_ratio <= 1.0 + FEASIBILITY_TOL,
    })
}

/// Full analysis: displacements, stresses, reactions, weight and feasibility.
pub fn solve(problem: &TrussProblem, design: &AreaAssignment) -> Result<AnalysisResult, AnalysisError> {
    let mut ws = Workspace::new();
    factor(problem, design.areas(), &mut ws)?;
    let n = problem.dofs().free_count();
    let dofs = problem.dofs();
    let lim = problem.limits;
    let e_mod = problem.material.elastic_modulus;
    let mut cases = Vec::with_capacity(problem.load_cases.len());
    for (rhs, load_case) in problem.load_vectors().iter().zip(&problem.load_cases) {
        let mut u = rhs.clone();
        linalg::cholesky_solve(&ws.k, n, &mut u);
        let disp: Vec<[f64; 3]> = (0..problem.nodes.len())
            .map(|k| std::array::from_fn(|axis| dofs.equation(k, axis).map_or(0.0, |e| u[e])))
            .collect();
        // Nodal forces exerted by the members, used for the reactions.
        let mut internal = vec![[0.0f64; 3]; problem.nodes.len()];
        let mut stresses = Vec::with_capacity(problem.members.len());
        let mut max_stress: f64 = 0.0;
        for m in &problem.members {
            let (a, b) = (m.endpoints.0 - 1, m.endpoints.1 - 1);
            let elong: f64 = (0..3).map(|x| m.unit[x] * (disp[b][x] - disp[a][x])).sum();
            let sigma = e_mod / m.length * elong;
            max_stress = max_stress.max(ratio(sigma, lim.stress_min, lim.stress_max));
            let axial = sigma * design.areas()[m.group];
            for x in 0..3 {
                internal[a][x] += axial * m.unit[x];
                internal[b][x] -= axial * m.unit[x];
            }
            stresses.push(sigma * 1e-6);
        }
        let mut applied = vec![[0.0f64; 3]; problem.nodes.len()];
        for f in &load_case.forces {
            for x in 0..3 {
                applied[f.node - 1][x] += f.force[x];
            }
        }
        let reactions = problem
            .nodes
            .iter()
            .enumerate()
            .map(|(k, node)| {
                std::array::from_fn(|x| {
                    if node.support[x] {
                        -(internal[k][x] + applied[k][x]) * 1e-3
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let max_disp = u
            .iter()
            .fold(0.0f64, |acc, &d| acc.max(ratio(d, lim.displacement_min, lim.displacement_max)));
        cases.push(CaseResult {
            displacements_mm: disp
                .iter()
                .map(|d| [d[0] * 1e3, d[1] * 1e3, d[2] * 1e3])
                .collect(),
            stresses_mpa: stresses,
            reactions_kn: reactions,
            max_stress_ratio: max_stress,
            max_displacement_ratio: max_disp,
        });
    }
    let worst = cases
        .iter()
        .map(|c| c.max_stress_ratio.max(c.max_displacement_ratio))
        .fold(0.0, f64::max);
    Ok(AnalysisResult {
        cases,
        weight_kg: total_weight(problem, design),
        feasible: worst <= 1.0 + FEASIBILITY_TOL,
        violation: worst - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        Catalog, Limits, LoadCase, Material, MemberSpec, NodalForce, Node3D,
    };

    fn bar(e_gpa: f64, area_mm2: f64) -> TrussProblem {
        TrussProblem::new(
            "bar",
            false,
            vec![
                Node3D { id: 1, coords: [0.0; 3], support: [true; 3] },
                Node3D { id: 2, coords: [1.0, 0.0, 0.0], support: [false, true, true] },
            ],
            vec![MemberSpec { id: 1, endpoints: (1, 2) }],
            vec![vec![1]],
            vec![LoadCase { forces: vec![NodalForce { node: 2, force: [1e3, 0.0, 0.0] }] }],
            Material { density: 1.0, elastic_modulus: e_gpa * 1e9 },
            Limits {
                stress_min: -20e6,
                stress_max: 20e6,
                displacement_min: -1.0,
                displacement_max: 1.0,
            },
            Catalog::from_mm2(&[area_mm2, 2.0 * area_mm2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_bar_matches_closed_form() {
        let p = bar(1.0, 100.0);
        let x = AreaAssignment::uniform(&p, 0);
        let k = assemble_stiffness(&p, &x);
        assert_eq!(k.size, 1);
        // EA/L = 1e9 * 1e-4 / 1
        assert!((k.get(0, 0) - 1e5).abs() < 1e-6);
        let r = solve(&p, &x).unwrap();
        let c = &r.cases[0];
        assert!((c.displacements_mm[1][0] - 10.0).abs() < 1e-9, "{:?}", c.displacements_mm);
        assert!((c.stresses_mpa[0] - 10.0).abs() < 1e-9);
        assert!((c.reactions_kn[0][0] + 1.0).abs() < 1e-9);
        assert_eq!(c.displacements_mm[0], [0.0; 3]);
        assert!(r.feasible);
        assert!((r.violation + 0.5).abs() < 1e-12);
    }

    #[test]
    fn weight_of_unit_member() {
        let p = bar(1.0, 1.0);
        assert!((total_weight(&p, &AreaAssignment::uniform(&p, 0)) - 1e-6).abs() < 1e-18);
        assert!((alpha_weight(&p) - 1e-6).abs() < 1e-18);
        assert!((max_weight(&p) - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn doubling_areas_doubles_stiffness() {
        let p = bar(70.0, 100.0);
        let k1 = assemble_stiffness(&p, &AreaAssignment::uniform(&p, 0));
        let k2 = assemble_stiffness(&p, &AreaAssignment::uniform(&p, 1));
        for (a, b) in k1.data.iter().zip(&k2.data) {
            assert!((2.0 * a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn mechanism_is_reported() {
        let mut p = bar(1.0, 100.0);
        p = TrussProblem::new(
            "free",
            false,
            {
                let mut n = p.nodes.clone();
                n[1].support = [false; 3];
                n
            },
            vec![MemberSpec { id: 1, endpoints: (1, 2) }],
            vec![vec![1]],
            p.load_cases.clone(),
            p.material,
            p.limits,
            p.catalog.clone(),
        )
        .unwrap();
        let err = solve(&p, &AreaAssignment::uniform(&p, 0)).unwrap_err();
        assert!(matches!(err, AnalysisError::Unstable { node: 2, axis: 'y', .. }), "{err}");
    }

    #[test]
    fn fast_path_agrees_with_full_solve() {
        let p = bar(1.0, 100.0);
        let mut ws = Workspace::new();
        let e = evaluate_indices(&p, &[0], &mut ws).unwrap();
        let r = solve(&p, &AreaAssignment::uniform(&p, 0)).unwrap();
        assert_eq!(e.feasible, r.feasible);
        assert!((e.max_ratio - 1.0 - r.violation).abs() < 1e-12);
    }

    #[test]
    fn design_validation() {
        let p = bar(1.0, 100.0);
        assert!(AreaAssignment::from_mm2(&p, &[100.0]).is_ok());
        assert!(matches!(
            AreaAssignment::from_mm2(&p, &[150.0]),
            Err(AnalysisError::NotInCatalog { group: 1, .. })
        ));
        assert!(matches!(
            AreaAssignment::from_indices(&p, &[0, 0]),
            Err(AnalysisError::DesignLength { expected: 1, found: 2 })
        ));
    }
}
