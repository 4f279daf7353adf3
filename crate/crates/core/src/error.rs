use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid candidate {id}: {reason}")]
    InvalidCandidate { id: usize, reason: String },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("candidates are not in sorted order at position {0}")]
    Unsorted(usize),

    #[error("fixed-point overflow: {0}")]
    Overflow(String),

    #[error("path members out of left-to-right order at {0}")]
    PathOrder(usize),

    #[error("unknown candidate id {0}")]
    UnknownCandidate(usize),

    #[error("line box lies outside the raster")]
    OutsideRaster,

    #[error("profile length {got} does not match line width {expected}")]
    ProfileLength { expected: usize, got: usize },

    #[error("synthetic layout infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Overflow(_) | Error::Infeasible(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
