use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecalError {
    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that must share a support, or have matching lengths, do not.
    #[error("structural error: {0}")]
    Structural(String),

    /// A distribution or curve violates its invariants.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// The posterior mean is 0 or 1, so one class has no mass.
    #[error("degenerate class split: posterior mean is {mean}")]
    DegenerateClass { mean: f64 },

    /// No sign change could be established for a root search.
    #[error("no root bracketed on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoRoot {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// The requested moment targets cannot be met by the transform family.
    #[error("infeasible: target {target} outside attainable range [{attainable_lo}, {attainable_hi}] ({what})")]
    Infeasible {
        what: String,
        target: f64,
        attainable_lo: f64,
        attainable_hi: f64,
    },
}

pub type Result<T, E = RecalError> = std::result::Result<T, E>;
