use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate mode selection: overlaps {first:.9} and {second:.9} are indistinguishable")]
    DegenerateSelection { first: f64, second: f64 },

    #[error("cubic recurrence is not monotone for kappa_tilde = {kappa_tilde}, alpha = {alpha}")]
    NonMonotone { kappa_tilde: f64, alpha: f64 },

    #[error("no plateau: nu = {nu} must exceed kappa_tilde = {kappa_tilde} with alpha = {alpha} > 0")]
    NoPlateau { nu: f64, kappa_tilde: f64, alpha: f64 },

    #[error("root bracket [{lo:.6e}, {hi:.6e}] does not enclose intensity {target:.6e}")]
    RootBracketFailure { lo: f64, hi: f64, target: f64 },

    #[error("target magnitude at cell {cell} is not positive ({value})")]
    NonpositiveTarget { cell: usize, value: f64 },

    #[error("{count} localizer eigenvalue(s) within the zero tolerance; invariant ill-defined")]
    AtGapClosing { count: usize },

    #[error("no probe inside the topological domain")]
    EmptyTopologicalDomain,

    #[error("integration diverged at t = {time:.4} (norm {norm:.3e}); reduce the step size")]
    StepSizeTooLarge { time: f64, norm: f64 },

    #[error("state has zero norm")]
    ZeroState,

    #[error("singular linear system")]
    Singular,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
