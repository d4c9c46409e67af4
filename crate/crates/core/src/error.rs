use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading inputs, building operators or running the
/// forward pass.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate neighborhood at point {index}: {reason}")]
    DegenerateNeighborhood { index: usize, reason: String },

    #[error("ill-conditioned least-squares fit{}: smallest pivot ratio {ratio:.3e}; the stencil may not span the tangent plane, or needs lambda > 0", at_point(*.index))]
    IllConditionedFit { index: Option<usize>, ratio: f64 },

    #[error("degenerate surface patch at point {index}: metric determinant {det:.3e}")]
    DegeneratePatch { index: usize, det: f64 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn at_point(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" at point {i}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a point index to a fit error raised by a point-agnostic solver.
    pub(crate) fn at(self, point: usize) -> Self {
        match self {
            Error::IllConditionedFit { index: None, ratio } => Error::IllConditionedFit {
                index: Some(point),
                ratio,
            },
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateNeighborhood { .. }
                | Error::IllConditionedFit { .. }
                | Error::DegeneratePatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
