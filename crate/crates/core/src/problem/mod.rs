//! Truss optimization problem instances.
//!
//! A [`TrussProblem`] holds geometry, member grouping, load cases, material,
//! constraint limits and the discrete catalog of admissible areas. Everything
//! is stored in SI units (m, N, Pa, kg, m²); problem files use engineering
//! units and are converted on load (see [`file`]).

mod file;

pub use file::{load_problem, parse_problem, save_problem, CatalogSpec, ProblemFile};

use crate::error::ProblemError;

/// Axis labels used in diagnostics.
pub const AXES: [char; 3] = ['x', 'y', 'z'];

/// A structural joint. Ids are 1-based and contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Node3D {
    pub id: usize,
    /// Coordinates in meters.
    pub coords: [f64; 3],
    /// `true` where the translational degree of freedom is suppressed.
    pub support: [bool; 3],
}

/// A bar connecting two nodes, belonging to exactly one design group.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub id: usize,
    /// Zero-based design group index.
    pub group: usize,
    /// Node ids (1-based) of the two ends; the unit vector points from the
    /// first to the second.
    pub endpoints: (usize, usize),
    /// Length in meters.
    pub length: f64,
    pub(crate) unit: [f64; 3],
}

/// A nodal force, newtons.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalForce {
    pub node: usize,
    pub force: [f64; 3],
}

/// One independent load case.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadCase {
    pub forces: Vec<NodalForce>,
}

/// Linear-elastic material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub elastic_modulus: f64,
}

/// Two-sided stress (Pa) and displacement (m) limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    pub stress_min: f64,
    pub stress_max: f64,
    pub displacement_min: f64,
    pub displacement_max: f64,
}

impl Limits {
    /// Checks `min < 0 < max` for both constraint families.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < 0.0 && 0.0 < hi;
        if !ok(self.stress_min, self.stress_max) {
            return Err(ProblemError::Limits(format!(
                "stress limits must satisfy min < 0 < max, got [{}, {}] Pa",
                self.stress_min, self.stress_max
            )));
        }
        if !ok(self.displacement_min, self.displacement_max) {
            return Err(ProblemError::Limits(format!(
                "displacement limits must satisfy min < 0 < max, got [{}, {}] m",
                self.displacement_min, self.displacement_max
            )));
        }
        Ok(())
    }

    /// Symmetric displacement bound `±limit` (meters), keeping the stress limits.
    pub fn with_displacement_bound(mut self, limit: f64) -> Self {
        self.displacement_min = -limit;
        self.displacement_max = limit;
        self
    }
}

/// Strictly ascending list of admissible cross-sectional areas, stored in m².
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    areas: Vec<f64>,
}

/// Area lookup tolerance, m² (0.005 mm²).
const AREA_MATCH_TOL: f64 = 0.005e-6;

impl Catalog {
    /// Builds a catalog from areas given in mm².
    pub fn from_mm2(areas_mm2: &[f64]) -> Result<Self, ProblemError> {
        if areas_mm2.len() < 2 {
            return Err(ProblemError::Catalog(format!(
                "need at least 2 areas, got {}",
                areas_mm2.len()
            )));
        }
        for (i, &a) in areas_mm2.iter().enumerate() {
            if !(a.is_finite() && a > 0.0) {
                return Err(ProblemError::Catalog(format!(
                    "area #{} = {a} is not positive",
                    i + 1
                )));
            }
            if i > 0 && a <= areas_mm2[i - 1] {
                return Err(ProblemError::Catalog(format!(
                    "areas must be strictly ascending: #{} = {} follows {}",
                    i + 1,
                    a,
                    areas_mm2[i - 1]
                )));
            }
        }
        Ok(Self {
            areas: areas_mm2.iter().map(|a| a * 1e-6).collect(),
        })
    }

    /// Arithmetic sequence `start, start + step, ...` of `count` areas in mm².
    pub fn arithmetic(start: f64, step: f64, count: usize) -> Result<Self, ProblemError> {
        if !(start > 0.0 && step > 0.0) || count < 2 {
            return Err(ProblemError::Catalog(format!(
                "arithmetic catalog needs start > 0, step > 0, count >= 2 (got {start}, {step}, {count})"
            )));
        }
        let areas: Vec<f64> = (0..count).map(|k| start + step * k as f64).collect();
        Self::from_mm2(&areas)
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    /// Area at zero-based index `h`, m².
    pub fn area(&self, h: usize) -> f64 {
        self.areas[h]
    }

    pub fn area_mm2(&self, h: usize) -> f64 {
        self.areas[h] * 1e6
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn smallest(&self) -> f64 {
        self.areas[0]
    }

    pub fn largest(&self) -> f64 {
        self.areas[self.areas.len() - 1]
    }

    /// Zero-based index of an area given in m², matched to 0.005 mm².
    pub fn index_of(&self, area: f64) -> Option<usize> {
        let pos = self.areas.partition_point(|&a| a < area - AREA_MATCH_TOL);
        (pos < self.areas.len() && (self.areas[pos] - area).abs() <= AREA_MATCH_TOL).then_some(pos)
    }

    pub fn index_of_mm2(&self, area_mm2: f64) -> Option<usize> {
        self.index_of(area_mm2 * 1e-6)
    }
}

/// Euclidean distance between two nodes, meters.
pub fn member_length(a: &Node3D, b: &Node3D) -> Result<f64, ProblemError> {
    let d = [
        b.coords[0] - a.coords[0],
        b.coords[1] - a.coords[1],
        b.coords[2] - a.coords[2],
    ];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len > 0.0 {
        Ok(len)
    } else {
        Err(ProblemError::ZeroLength { member: 0 })
    }
}

/// Numbering of unsuppressed degrees of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    /// For each `3 * node_index + axis`, the free equation number if any.
    equation: Vec<Option<usize>>,
    /// For each equation, `(node index, axis)`.
    owner: Vec<(usize, usize)>,
}

impl DofMap {
    fn new(nodes: &[Node3D]) -> Self {
        let mut equation = Vec::with_capacity(nodes.len() * 3);
        let mut owner = Vec::new();
        for (k, node) in nodes.iter().enumerate() {
            for axis in 0..3 {
                if node.support[axis] {
                    equation.push(None);
                } else {
                    equation.push(Some(owner.len()));
                    owner.push((k, axis));
                }
            }
        }
        Self { equation, owner }
    }

    pub fn free_count(&self) -> usize {
        self.owner.len()
    }

    /// Free equation of a node index (zero-based) and axis.
    pub fn equation(&self, node_index: usize, axis: usize) -> Option<usize> {
        self.equation[3 * node_index + axis]
    }

    /// `(node index, axis)` owning an equation.
    pub fn owner(&self, equation: usize) -> (usize, usize) {
        self.owner[equation]
    }
}

/// A validated truss sizing problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TrussProblem {
    pub name: String,
    pub planar: bool,
    pub nodes: Vec<Node3D>,
    pub members: Vec<Member>,
    /// Zero-based member indices per group.
    pub groups: Vec<Vec<usize>>,
    pub load_cases: Vec<LoadCase>,
    pub material: Material,
    pub limits: Limits,
    pub catalog: Catalog,
    dofs: DofMap,
    group_lengths: Vec<f64>,
    /// Free-DOF load vectors, one per load case.
    load_vectors: Vec<Vec<f64>>,
}

/// Raw member description used while building a problem.
#[derive(Clone, Debug)]
pub struct MemberSpec {
    pub id: usize,
    pub endpoints: (usize, usize),
}

impl TrussProblem {
    /// Validates the raw pieces and derives lengths, DOF numbering and load vectors.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        planar: bool,
        mut nodes: Vec<Node3D>,
        members: Vec<MemberSpec>,
        groups: Vec<Vec<usize>>,
        load_cases: Vec<LoadCase>,
        material: Material,
        limits: Limits,
        catalog: Catalog,
    ) -> Result<Self, ProblemError> {
        nodes.sort_by_key(|n| n.id);
        for (k, node) in nodes.iter().enumerate() {
            if node.id != k + 1 {
                return Err(ProblemError::NodeIds {
                    expected: nodes.len(),
                    found: node.id,
                });
            }
        }
        if planar {
            for node in nodes.iter_mut() {
                if node.coords[2] != 0.0 {
                    return Err(ProblemError::NotPlanar(node.id));
                }
                node.support[2] = true;
            }
        }
        if !(material.density > 0.0 && material.density.is_finite()) {
            return Err(ProblemError::Material(format!(
                "density must be positive, got {}",
                material.density
            )));
        }
        if !(material.elastic_modulus > 0.0 && material.elastic_modulus.is_finite()) {
            return Err(ProblemError::Material(format!(
                "elastic modulus must be positive, got {}",
                material.elastic_modulus
            )));
        }
        limits.validate()?;

        let mut members = members;
        members.sort_by_key(|m| m.id);
        for (j, m) in members.iter().enumerate() {
            if m.id != j + 1 {
                return Err(ProblemError::MemberIds {
                    expected: members.len(),
                    found: m.id,
                });
            }
        }

        if groups.is_empty() {
            return Err(ProblemError::NoGroups);
        }
        let mut group_of = vec![Vec::new(); members.len()];
        let mut group_indices = Vec::with_capacity(groups.len());
        for (i, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(ProblemError::EmptyGroup(i + 1));
            }
            let mut idx = Vec::with_capacity(group.len());
            for &member_id in group {
                if member_id == 0 || member_id > members.len() {
                    return Err(ProblemError::DanglingMember {
                        group: i + 1,
                        member: member_id,
                    });
                }
                group_of[member_id - 1].push(i);
                idx.push(member_id - 1);
            }
            group_indices.push(idx);
        }
        for (j, gs) in group_of.iter().enumerate() {
            if gs.len() != 1 {
                return Err(ProblemError::MemberGrouping {
                    member: j + 1,
                    count: gs.len(),
                });
            }
        }

        let mut built = Vec::with_capacity(members.len());
        for (spec, gs) in members.iter().zip(&group_of) {
            let (h1, h2) = spec.endpoints;
            for h in [h1, h2] {
                if h == 0 || h > nodes.len() {
                    return Err(ProblemError::DanglingNode {
                        member: spec.id,
                        node: h,
                    });
                }
            }
            if h1 == h2 {
                return Err(ProblemError::SelfLoop {
                    member: spec.id,
                    node: h1,
                });
            }
            let (a, b) = (&nodes[h1 - 1], &nodes[h2 - 1]);
            let length = member_length(a, b)
                .map_err(|_| ProblemError::ZeroLength { member: spec.id })?;
            let unit = [
                (b.coords[0] - a.coords[0]) / length,
                (b.coords[1] - a.coords[1]) / length,
                (b.coords[2] - a.coords[2]) / length,
            ];
            built.push(Member {
                id: spec.id,
                group: gs[0],
                endpoints: (h1, h2),
                length,
                unit,
            });
        }

        if load_cases.is_empty() {
            return Err(ProblemError::NoLoadCases);
        }
        for (c, case) in load_cases.iter().enumerate() {
            for f in &case.forces {
                if f.node == 0 || f.node > nodes.len() {
                    return Err(ProblemError::DanglingLoad {
                        case: c + 1,
                        node: f.node,
                    });
                }
            }
            if !case.forces.iter().any(|f| f.force.iter().any(|&v| v != 0.0)) {
                return Err(ProblemError::EmptyLoadCase(c + 1));
            }
        }

        let dofs = DofMap::new(&nodes);
        let load_vectors = load_cases
            .iter()
            .map(|case| {
                let mut rhs = vec![0.0; dofs.free_count()];
                for f in &case.forces {
                    for axis in 0..3 {
                        if let Some(eq) = dofs.equation(f.node - 1, axis) {
                            rhs[eq] += f.force[axis];
                        }
                    }
                }
                rhs
            })
            .collect();
        let group_lengths = group_indices
            .iter()
            .map(|g| g.iter().map(|&j| built[j].length).sum())
            .collect();

        Ok(Self {
            name: name.into(),
            planar,
            nodes,
            members: built,
            groups: group_indices,
            load_cases,
            material,
            limits,
            catalog,
            dofs,
            group_lengths,
            load_vectors,
        })
    }

    /// Number of design groups `g`.
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Number of catalog entries `b`.
    pub fn catalog_len(&self) -> usize {
        self.catalog.len()
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Total member length per group, meters.
    pub fn group_lengths(&self) -> &[f64] {
        &self.group_lengths
    }

    pub(crate) fn load_vectors(&self) -> &[Vec<f64>] {
        &self.load_vectors
    }

    /// Copy of the problem with a different set of limits.
    pub fn with_limits(&self, limits: Limits) -> Result<Self, ProblemError> {
        limits.validate()?;
        let mut p = self.clone();
        p.limits = limits;
        Ok(p)
    }

    /// Number of members in each group.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}
