use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading or validating a problem instance.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed problem file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("node ids must be contiguous 1..{expected}, found id {found}")]
    NodeIds { expected: usize, found: usize },
    #[error("member {member} references unknown node {node}")]
    DanglingNode { member: usize, node: usize },
    #[error("member {member} connects node {node} to itself")]
    SelfLoop { member: usize, node: usize },
    #[error("member {member} has zero length")]
    ZeroLength { member: usize },
    #[error("member ids must be contiguous 1..{expected}, found id {found}")]
    MemberIds { expected: usize, found: usize },
    #[error("group {group} references unknown member {member}")]
    DanglingMember { group: usize, member: usize },
    #[error("member {member} is assigned to {count} groups, expected exactly one")]
    MemberGrouping { member: usize, count: usize },
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("problem has no member groups")]
    NoGroups,
    #[error("load case {case} references unknown node {node}")]
    DanglingLoad { case: usize, node: usize },
    #[error("load case {0} has no nonzero force component")]
    EmptyLoadCase(usize),
    #[error("problem has no load cases")]
    NoLoadCases,
    #[error("planar problem has node {0} with nonzero z coordinate")]
    NotPlanar(usize),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("invalid material: {0}")]
    Material(String),
    #[error("invalid limits: {0}")]
    Limits(String),
}

/// Errors raised by the structural analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(
        "unstable structure: stiffness is singular along node {node} {axis} (pivot {pivot:.3e})"
    )]
    Unstable { node: usize, axis: char, pivot: f64 },
    #[error("design has {found} areas, problem has {expected} groups")]
    DesignLength { expected: usize, found: usize },
    #[error("area {area} for group {group} is not in the catalog")]
    NotInCatalog { group: usize, area: f64 },
}

/// Errors raised by the optimizer layers.
#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("exhaustive search over {designs} designs exceeds the limit of {limit}")]
    TooLarge { designs: f64, limit: u64 },
    #[error("action is not in the current action space")]
    InvalidAction,
    #[error("published design violates its constraints (violation {violation:.4})")]
    GoldenInfeasible { violation: f64 },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
