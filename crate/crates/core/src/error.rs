use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("orbit diverged at parameter {parameter} (iterate {iteration}, |x| = {value:e})")]
    DivergedOrbit {
        parameter: f64,
        iteration: usize,
        value: f64,
    },
    #[error("no real fixed point for parameter {0}")]
    NoRealFixedPoint(f64),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("map derivative vanished at x = {x:e} (iterate {iteration})")]
    DerivativeSingular { x: f64, iteration: usize },
    #[error("period-doubling cascade not found: {0}")]
    CascadeNotFound(String),
    #[error("{0:?} is not supported by this operation")]
    UnsupportedFamily(crate::reductions::Family),
    #[error("point {point} outside the domain of {what}")]
    DomainViolation { what: String, point: f64 },
    #[error("solution blew up at eta = {eta} (|x| = {value:e})")]
    BlowUp { eta: f64, value: f64 },
    #[error("step size underflow at eta = {eta} (h = {step:e})")]
    StiffnessAbort { eta: f64, step: f64 },
    #[error("P(phi0) = {value:e} < 0: initial value outside the allowed region")]
    NegativeP { value: f64 },
    #[error("no interior extremum available for peak alignment")]
    AlignmentFailed,
    #[error("profile tail {value:e} at the domain boundary exceeds {limit:e}")]
    TailTooFat { value: f64, limit: f64 },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("non-finite field value at step {step}")]
    NanDetected { step: usize },
    #[error("field has no trackable extremum")]
    NoTrackablePeak,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of a numerical run, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidArgument(_) | Error::UnsupportedFamily(_) | Error::DomainViolation { .. }
        )
    }
}
