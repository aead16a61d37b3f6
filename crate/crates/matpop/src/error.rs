//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model validation, the characteristic-curve machinery,
/// the integrators and the experiment drivers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A standing hypothesis on a model function failed.
    #[error("hypothesis violation ({which}) at m = {location}: {detail}")]
    HypothesisViolation {
        which: String,
        location: f64,
        detail: String,
    },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failure on [{a}, {b}]: estimated error {err:e} above tolerance")]
    QuadratureFailure { a: f64, b: f64, err: f64 },

    /// A root finder was called with a bracket that does not change sign.
    /// For the commitment-maturity equation this signals a hypothesis violation.
    #[error("root not bracketed on [{lo}, {hi}] (f(lo) = {flo:e}, f(hi) = {fhi:e})")]
    RootNotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },

    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error in {op}: {detail}")]
    DomainError { op: String, detail: String },

    /// The adaptive step-size controller shrank the step below the
    /// representable minimum.
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    /// The per-step fixed-point iteration of the field solver failed to
    /// contract; the time step is too large.
    #[error("fixed-point iteration diverged at t = {t} (residual {residual:e} after {iters} sweeps)")]
    FixedPointDivergence { t: f64, residual: f64, iters: usize },

    /// A history lookup reached back past the retained buffer.
    #[error("history underflow: requested t = {requested}, oldest retained t = {oldest}")]
    HistoryUnderflow { requested: f64, oldest: f64 },

    /// The complex-strip scan for characteristic roots could not certify
    /// its result.
    #[error("root search inconclusive: {detail}")]
    SearchInconclusive { detail: String },

    /// An experiment precondition does not hold for the supplied inputs.
    #[error("precondition violated: {detail}")]
    PreconditionViolated { detail: String },

    /// Malformed tabulated input (non-monotone abscissae, length mismatch, ...).
    #[error("invalid table: {detail}")]
    InvalidTable { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
