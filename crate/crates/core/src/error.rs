use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested size exceeds what exact enumeration or dense storage supports.
    #[error("capacity error: {what} requires n <= {limit}, got n = {n}{hint}")]
    Capacity {
        what: &'static str,
        n: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("disagreement class too large to enumerate: delta = {delta} exceeds {limit}")]
    ClassTooLarge { delta: usize, limit: usize },

    #[error("no unbiased estimator: target is outside the column space (least-squares residual {residual:e})")]
    NoUnbiasedEstimator { residual: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
