use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0} is not inside the unit disc (boundary margin {1:e})")]
    OutsideDisc(Complex64, f64),

    #[error("point {0} is not inside the upper half-plane (margin {1:e})")]
    OutsideHalfPlane(Complex64, f64),

    #[error("singular Möbius matrix (det = {0})")]
    SingularMatrix(Complex64),

    #[error("matrix is not a disc automorphism (structural residual {0:e})")]
    NotDiscAutomorphism(f64),

    #[error("cannot compose Möbius maps acting on different domains ({0} after {1})")]
    IncompatibleDomains(&'static str, &'static str),

    #[error("evaluation at a pole of the Möbius map (z = {0})")]
    Pole(Complex64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hyperbolic distortion {0} exceeds 1: expression is not a self-map of the disc")]
    DistortionExceedsOne(f64),

    #[error("generator stream exhausted at index {0}")]
    StreamExhausted(usize),

    #[error("unknown stream rule '{0}'")]
    UnknownRule(String),

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("composition depth cap {0} exceeded")]
    DepthCap(usize),

    #[error("constant generator at index {0}: nonconstant maps required")]
    ConstantGenerator(usize),

    #[error("inconclusive after {iterations} iterations: {reason}")]
    Inconclusive {
        iterations: usize,
        reason: String,
        last_points: Vec<Complex64>,
    },

    #[error("precision exhausted at n = {n}: {reason}")]
    PrecisionExhausted { n: usize, reason: String },

    #[error("iteration cap {cap} exceeded: {reason}")]
    IterationCap { cap: usize, reason: String },

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidArgument(format!("json: {e}"))
    }
}

impl Error {
    /// Errors caused by bad input, as opposed to numerical aborts.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::OutsideDisc(..)
                | Error::OutsideHalfPlane(..)
                | Error::SingularMatrix(_)
                | Error::NotDiscAutomorphism(_)
                | Error::IncompatibleDomains(..)
                | Error::InvalidArgument(_)
                | Error::UnknownRule(_)
                | Error::ConstantGenerator(_)
                | Error::Io(_)
        )
    }
}
