use thiserror::Error;

/// Errors raised by the kernels and solvers in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point ({x}, {y}) lies outside the domain {domain}")]
    OutsideDomain { x: f64, y: f64, domain: &'static str },

    #[error("winding number undefined: curve passes within {distance:e} of the origin")]
    UndefinedWinding { distance: f64 },

    #[error("curve is under-sampled: winding sum {value} is not close to an integer")]
    UnderSampledCurve { value: f64 },

    #[error("quadrature did not converge; best estimate {estimate} (error estimate {error:e})")]
    QuadratureFailure { estimate: f64, error: f64 },

    #[error("no sign change on bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finding did not converge after {iterations} iterations")]
    RootNotConverged { iterations: usize },

    #[error("ODE step size underflow at r = {r} (h = {h:e})")]
    StepUnderflow { r: f64, h: f64, last_state: Vec<f64> },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolveFailure { iterations: usize, residual: f64 },

    #[error("nonlinear solve failed: {reason} (residual history {history:?})")]
    NonlinearSolveFailure { reason: String, history: Vec<f64> },

    #[error("inadmissible state at r = {r}: Jacobian d = {d:e} is below the floor")]
    InadmissibleState { r: f64, d: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("gradient infeasible: 1 + p2 = {value:e} <= 0")]
    InfeasibleGradient { value: f64 },

    #[error("bracketing failed: {reason}; samples {samples:?}")]
    BracketingFailure { reason: String, samples: Vec<(f64, f64)> },

    #[error("shooting failed from every start: {reason}")]
    ShootingFailure { reason: String, landscape: Vec<(f64, f64, f64)> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
