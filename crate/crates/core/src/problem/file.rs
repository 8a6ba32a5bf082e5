//! JSON problem file schema.
//!
//! Files use engineering units: coordinates in m, forces in kN, modulus in GPa,
//! stresses in MPa, displacements in mm, density in kg/m³ and areas in mm².
//! See `docs/problem-format.md` for the full schema.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Catalog, Limits, LoadCase, Material, MemberSpec, NodalForce, Node3D, TrussProblem,
};
use crate::error::ProblemError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: String,
    /// Planar problems fix the z degree of freedom of every node.
    #[serde(default)]
    pub planar: bool,
    pub nodes: Vec<NodeEntry>,
    pub members: Vec<MemberEntry>,
    /// Member ids per design group.
    pub groups: Vec<Vec<usize>>,
    pub load_cases: Vec<LoadCaseEntry>,
    pub material: MaterialEntry,
    pub limits: LimitsEntry,
    pub catalog: CatalogSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    /// Suppressed translations, `[x, y, z]`.
    #[serde(default)]
    pub support: [bool; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MemberEntry {
    pub id: usize,
    pub nodes: [usize; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LoadCaseEntry {
    pub forces: Vec<ForceEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ForceEntry {
    pub node: usize,
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
    #[serde(default)]
    pub fz: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    /// kg/m³
    pub density: f64,
    /// GPa
    pub elastic_modulus: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LimitsEntry {
    /// MPa
    pub stress_min: f64,
    pub stress_max: f64,
    /// mm
    pub displacement_min: f64,
    pub displacement_max: f64,
}

/// Either an explicit ascending list or an arithmetic progression, mm².
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CatalogSpec {
    List(Vec<f64>),
    Arithmetic { start: f64, step: f64, count: usize },
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<TrussProblem, ProblemError> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node3D {
                id: n.id,
                coords: [n.x, n.y, n.z],
                support: n.support,
            })
            .collect();
        let members = self
            .members
            .iter()
            .map(|m| MemberSpec {
                id: m.id,
                endpoints: (m.nodes[0], m.nodes[1]),
            })
            .collect();
        let load_cases = self
            .load_cases
            .iter()
            .map(|c| LoadCase {
                forces: c
                    .forces
                    .iter()
                    .map(|f| NodalForce {
                        node: f.node,
                        force: [f.fx * 1e3, f.fy * 1e3, f.fz * 1e3],
                    })
                    .collect(),
            })
            .collect();
        let material = Material {
            density: self.material.density,
            elastic_modulus: self.material.elastic_modulus * 1e9,
        };
        let limits = Limits {
            stress_min: self.limits.stress_min * 1e6,
            stress_max: self.limits.stress_max * 1e6,
            displacement_min: self.limits.displacement_min * 1e-3,
            displacement_max: self.limits.displacement_max * 1e-3,
        };
        let catalog = match &self.catalog {
            CatalogSpec::List(areas) => Catalog::from_mm2(areas)?,
            CatalogSpec::Arithmetic { start, step, count } => {
                Catalog::arithmetic(*start, *step, *count)?
            }
        };
        TrussProblem::new(
            self.name,
            self.planar,
            nodes,
            members,
            self.groups,
            load_cases,
            material,
            limits,
            catalog,
        )
    }

    /// File representation of a problem, with the catalog written as an explicit list.
    pub fn from_problem(problem: &TrussProblem) -> Self {
        let round = |v: f64| (v * 1e9).round() / 1e9;
        Self {
            name: problem.name.clone(),
            planar: problem.planar,
            nodes: problem
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id,
                    x: n.coords[0],
                    y: n.coords[1],
                    z: n.coords[2],
                    support: n.support,
                })
                .collect(),
            members: problem
                .members
                .iter()
                .map(|m| MemberEntry {
                    id: m.id,
                    nodes: [m.endpoints.0, m.endpoints.1],
                })
                .collect(),
            groups: problem
                .groups
                .iter()
                .map(|g| g.iter().map(|&j| problem.members[j].id).collect())
                .collect(),
            load_cases: problem
                .load_cases
                .iter()
                .map(|c| LoadCaseEntry {
                    forces: c
                        .forces
                        .iter()
                        .map(|f| ForceEntry {
                            node: f.node,
                            fx: round(f.force[0] * 1e-3),
                            fy: round(f.force[1] * 1e-3),
                            fz: round(f.force[2] * 1e-3),
                        })
                        .collect(),
                })
                .collect(),
            material: MaterialEntry {
                density: problem.material.density,
                elastic_modulus: round(problem.material.elastic_modulus * 1e-9),
            },
            limits: LimitsEntry {
                stress_min: round(problem.limits.stress_min * 1e-6),
                stress_max: round(problem.limits.stress_max * 1e-6),
                displacement_min: round(problem.limits.displacement_min * 1e3),
                displacement_max: round(problem.limits.displacement_max * 1e3),
            },
            catalog: CatalogSpec::List(
                (0..problem.catalog.len())
                    .map(|h| round(problem.catalog.area_mm2(h)))
                    .collect(),
            ),
        }
    }
}

pub fn parse_problem(text: &str) -> Result<TrussProblem, ProblemError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    file.into_problem()
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<TrussProblem, ProblemError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text)
}

pub fn save_problem(problem: &TrussProblem, path: impl AsRef<Path>) -> Result<(), ProblemError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&ProblemFile::from_problem(problem))?;
    fs::write(path, text + "\n").map_err(|source| ProblemError::Io {
        path: path.to_path_buf(),
        source,
    })
}
