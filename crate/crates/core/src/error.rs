use thiserror::Error;

/// Errors shared by the simulation, readout and analytic pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no usable equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("trajectory diverged at t = {t:.4} (|s| = {magnitude:.3e})")]
    Diverged { t: f64, magnitude: f64 },

    #[error("input sequence exhausted at clock cycle {0}")]
    InputExhausted(i64),

    #[error("recall depth {requested} exceeds retained prehistory {available}")]
    RecallTooDeep { requested: usize, available: usize },

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("target variance is zero")]
    ZeroVariance,

    #[error("triangle expansion did not converge within {rows} rows; operating point at or beyond instability")]
    TriangleDiverged { rows: usize },

    #[error("inconsistent gain measurements: {0}")]
    InconsistentMeasurement(String),

    #[error("probe response still growing after the settle window; system is not at a stable equilibrium")]
    UnstableProbe,

    #[error("probe response amplitude {0:.3e} is below the resolvable floor")]
    AmplitudeBelowFloor(f64),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
