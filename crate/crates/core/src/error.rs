use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("non-finite value at stage `{stage}`")]
    NonFinite { stage: String },

    #[error("invalid state: {0}")]
    State(&'static str),

    #[error("numeric underflow in {0}: all unnormalized assignment mass vanished, try a smaller beta")]
    Underflow(String),

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unsupported corruption kind `{name}`; valid kinds: {valid}")]
    UnsupportedKind { name: String, valid: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Self {
        Error::Dimension { op, lhs, rhs }
    }
}
