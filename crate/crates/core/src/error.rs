use thiserror::Error;

/// Errors produced by graph construction, RWA reduction, propagation and optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid level system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("level graph contains a cycle")]
    CyclicGraph,

    #[error("level graph is not connected")]
    DisconnectedGraph,

    #[error("drive field {field} (omega = {omega}) is not resonant with any coupled transition")]
    NoResonantTransition { field: usize, omega: f64 },

    #[error("drive field {field} (omega = {omega}) matches {count} coupled transitions")]
    AmbiguousResonance { field: usize, omega: f64, count: usize },

    #[error("transition ({k},{j}) is driven by fields {first} and {second}")]
    DuplicateDrive {
        k: usize,
        j: usize,
        first: usize,
        second: usize,
    },

    #[error("coupled transition ({k},{j}) has no drive field assigned")]
    UnassignedEdge { k: usize, j: usize },

    #[error("gamma assignment leaves a residual phase of {max_residual:e} on edge ({k},{j})")]
    NonvanishingResiduals { k: usize, j: usize, max_residual: f64 },

    #[error("generator is not Hermitian (deviation {deviation:e})")]
    NonHermitianGenerator { deviation: f64 },

    #[error("state is in the {found} frame, expected {expected}")]
    FrameMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("states have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("propagation cancelled at t = {t}")]
    Cancelled { t: f64 },

    #[error("goal is not reachable with the given drive (largest reachable angle {max_reachable})")]
    Unreachable { max_reachable: f64 },

    #[error("inconsistent goal: {0}")]
    InconsistentGoal(String),

    #[error("objective returned a non-finite value ({value}) at evaluation {evaluation}")]
    ObjectiveNonFinite { value: f64, evaluation: usize },

    #[error("could not draw a non-degenerate spectrum after {attempts} attempts")]
    ResampleExhausted { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
