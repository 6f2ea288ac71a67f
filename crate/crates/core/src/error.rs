use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),

    #[error("tail bound {bound:.3e} exceeds tolerance {tol:.3e}; need lambda_max >= {needed:.1}")]
    TailTooLarge { bound: f64, tol: f64, needed: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
