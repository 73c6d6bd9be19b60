use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-positive distance ({distance} m) for the {link} link")]
    NonPositiveDistance { link: &'static str, distance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Training loss became non-finite or blew up relative to its start.
    #[error(
        "training diverged at epoch {epoch} (loss {loss:e}); retry with a smaller learning rate"
    )]
    Diverged { epoch: usize, loss: f64 },

    #[error("the geometry strategy needs exactly one user, got {0}")]
    GeometryNeedsSingleUser(usize),

    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
