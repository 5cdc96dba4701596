//! Error types shared across the solver modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of specification validation, feasibility gates, and
/// numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A specification field violates its invariant (σ ≤ 0, p ≥ 1, …).
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// An operation argument violates its precondition (t ≥ s, ψ < 0, …).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The capital on hand cannot fund the floors/guarantee.
    #[error("infeasible capital {capital}: minimum required is {minimum}")]
    InfeasibleCapital { capital: f64, minimum: f64 },

    /// A strategy fraction was requested at zero wealth.
    #[error("strategy undefined at zero wealth ({0})")]
    UndefinedStrategy(String),

    /// A root finder could not bracket a sign change.
    #[error("no sign bracket: {0}")]
    NoBracket(String),

    /// A root finder or iteration failed to reach its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),
}
