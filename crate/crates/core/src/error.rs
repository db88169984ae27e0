use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("brute-force enumeration rejected: N = {0} > 20")]
    EnumerationTooLarge(usize),

    #[error("matrix too large for characteristic polynomial: n = {0} > 64")]
    MatrixTooLarge(usize),

    #[error("not a rest point: residual {residual:.3e} exceeds {limit:.3e}")]
    NotARestPoint { residual: f64, limit: f64 },

    #[error("root finding did not converge after {0} iterations")]
    RootsDiverged(usize),

    #[error("power iteration did not converge")]
    PowerIterationFailed,

    #[error("ambiguous classification: {0} rest points within radius")]
    AmbiguousClassification(usize),

    #[error("solver pathology: {0}")]
    SolverPathology(String),

    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),

    #[error("operation requires a 2x2 game, got {players} players and {routes} routes")]
    NotTwoByTwo { players: usize, routes: usize },

    #[error("operation requires case (c) with three fixed points, got case ({0})")]
    NotCaseC(char),

    #[error("heteroclinic orbit did not reach its target rest point")]
    WrongHeteroclinicTarget,

    #[error("domain error: {0}")]
    Domain(String),
}
