//! Error type shared across the solver.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum KropinaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinates: {coords:?}")]
    NonFiniteCoordinates { coords: Vec<f64> },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("non-smooth evaluation at {point:?} (square root at zero, log at a non-positive argument, or division by zero)")]
    NonSmoothEvaluation { point: Vec<f64> },

    #[error("direction outside the conic domain at {point:?}: h(y, wind) = {beta:.3e} is below the admissibility guard {guard:.3e}")]
    OutsideConicDomain { point: Vec<f64>, beta: f64, guard: f64 },

    #[error("zero tangent vector has no metric value")]
    ZeroVector,

    #[error("navigation data violates |wind| = speed at {point:?}: |wind| = {wind_norm:.17}, speed = {speed:.17}")]
    NormMismatch { point: Vec<f64>, wind_norm: f64, speed: f64 },

    #[error("speed is not positive at {point:?}: {speed:.3e}")]
    NonPositiveSpeed { point: Vec<f64>, speed: f64 },

    #[error("indicatrix equation has no positive root at {point:?} (wind dominates speed in this direction)")]
    NoPositiveRoot { point: Vec<f64> },

    #[error("one-form data is singular at {point:?}: b^2 = {b2:.3e}")]
    SingularOneForm { point: Vec<f64>, b2: f64 },

    #[error("fundamental tensor is numerically degenerate at {point:?} (condition estimate {condition:.3e})")]
    DegenerateTensor { point: Vec<f64>, condition: f64 },

    #[error("heading {phi:.17} rad is excluded: the resultant velocity leaves the admissible cone")]
    ExcludedHeading { phi: f64 },

    #[error("initial state is outside the admissible domain: {detail}")]
    BadInitialState { detail: String },

    #[error("configuration error: {detail}")]
    Config { detail: String },

    #[error("i/o error: {detail}")]
    Io { detail: String },

    #[error("integration step size collapsed at t = {t:.6e} before reaching the time limit")]
    StepFailure { t: f64 },

    #[error("trajectory left the admissible domain at t = {t:.6e}; travel time over the requested span is undefined")]
    LeftDomain { t: f64 },

    #[error("no admissible heading reaches the target {target:?} within the bracket")]
    TargetUnreachable { target: Vec<f64> },

    #[error("empty sample set: {what}")]
    EmptyInput { what: &'static str },
}
