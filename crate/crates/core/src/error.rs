use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A structural constraint on the antenna/stream/group budget was violated.
    #[error("constraint `{constraint}` violated: {detail}")]
    Constraint {
        constraint: &'static str,
        detail: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("passivity violated: |theta| = {0} exceeds 1")]
    Passivity(f64),

    #[error("quadrature did not converge (last change {0:.3e})")]
    Quadrature(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn constraint(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::Constraint {
            constraint,
            detail: detail.into(),
        }
    }
}
