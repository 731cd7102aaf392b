use thiserror::Error;

use crate::model::Domain;
use crate::schedule::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: expected {expected:?}, got {found:?}")]
    DomainMismatch { expected: Domain, found: Domain },

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("variable index {index} out of range for {n} variables")]
    VariableOutOfRange { index: usize, n: usize },

    #[error("quadratic key ({i},{j}) must satisfy i < j")]
    BadQuadraticKey { i: usize, j: usize },

    #[error("duplicate coefficient for {key}")]
    DuplicateCoefficient { key: String },

    #[error("coefficient for {key} is not finite")]
    NonFiniteCoefficient { key: String },

    #[error("pair ({i},{j}) is not an edge of the model's topology")]
    OffTopology { i: usize, j: usize },

    #[error("dead node id {id} out of range for {max} nodes")]
    DeadNodeOutOfRange { id: usize, max: usize },

    #[error("topology has no live nodes")]
    EmptyTopology,

    #[error("invalid interval ({lo}, {hi}): bounds must be finite with lo < hi")]
    BadInterval { lo: f64, hi: f64 },

    #[error("{op} supports at most {max} variables, got {n}")]
    TooManyVariables {
        op: &'static str,
        n: usize,
        max: usize,
    },

    #[error("invalid schedule: {}", format_violations(.0))]
    InvalidSchedule(Vec<Violation>),

    #[error("quench slope {slope} exceeds maximum {max_slope} per microsecond")]
    InfeasibleQuench { slope: f64, max_slope: f64 },

    #[error("quench time {t} outside valid range ({lo}, {hi}]")]
    QuenchTimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("time {t} outside schedule range [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("no freezeout point in schedule range: target {target} outside [{lo}, {hi}]")]
    CurveTargetOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("sample request must have at least one read")]
    ZeroReads,

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("fraction {fraction} outside (0, 1]")]
    BadFraction { fraction: f64 },

    #[error("sample sets must have equal reads: {a} vs {b}")]
    ReadCountMismatch { a: u64, b: u64 },

    #[error("models do not share topology and coefficient key sets")]
    KeySetMismatch,

    #[error("crossover pool too small: N*p_cross = {product} < 2")]
    CrossoverPoolTooSmall { product: f64 },

    #[error("clique embedding capacity exceeded: {requested} logical variables, capacity {capacity}")]
    CapacityExceeded { requested: usize, capacity: usize },

    #[error("embedding requires dead node {id}")]
    DeadNodeCollision { id: usize },

    #[error("no physical edge available for logical coupler ({u},{v})")]
    MissingPhysicalEdge { u: usize, v: usize },

    #[error("chains are not disjoint: physical qubit {id} reused")]
    OverlappingChains { id: usize },

    #[error("chain for logical variable {logical} is not connected in the topology")]
    DisconnectedChain { logical: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateData(&'static str),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter {
        name: &'static str,
        message: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
