use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least {min} samples, got {got}")]
    GridTooSmall { min: usize, got: usize },

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dt * max(c) = {product} must be < 1 (dt = {dt})")]
    Stability { dt: f64, product: f64 },

    #[error("diffusion coefficient a({x}) = {value} is not positive")]
    NonPositiveDiffusion { x: f64, value: f64 },

    #[error("transport speed b({x}) = {value} is not positive")]
    NonPositiveSpeed { x: f64, value: f64 },

    #[error("singular step system at dt = {dt}")]
    Singular { dt: f64 },

    #[error("non-finite right-hand side at t = {t}")]
    NonFiniteRhs { t: f64 },

    #[error("declared {declared} feedback contradicted at (u, v) = ({u}, {v}): h_v = {h_v}")]
    FeedbackSign {
        declared: &'static str,
        u: f64,
        v: f64,
        h_v: f64,
    },

    #[error("history span {got} does not match delay r = {expected}")]
    SpanMismatch { expected: f64, got: f64 },

    #[error("(x, t) = ({x}, {t}) lies outside the characteristic region")]
    OutsideRegion { x: f64, t: f64 },

    #[error("ill-conditioned extraction at x = {x}: |d(x)| = {d}")]
    Conditioning { x: f64, d: f64 },

    #[error("probe point {0} outside [0, 1]")]
    ProbeOutOfRange(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
