use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("mesh validation failed: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("point outside evaluation domain: {0}")]
    EvaluationDomain(String),

    #[error("unsupported quadrature order {0} (expected 1, 3, 6 or 12)")]
    UnsupportedQuadrature(usize),

    #[error("orientation error in element {element}, face {face}: {detail}")]
    Orientation {
        element: usize,
        face: usize,
        detail: String,
    },

    #[error("degenerate element {element}: {detail}")]
    DegenerateElement { element: usize, detail: String },

    #[error("E0 of element {element} is ill-conditioned (condition estimate {condition:.3e})")]
    Conditioning { element: usize, condition: f64 },

    #[error("eigen decomposition failed for element {element}: {detail}")]
    Decomposition { element: usize, detail: String },

    #[error("modal basis of element {element} is singular: {detail}")]
    ModalBasis { element: usize, detail: String },

    #[error("eigen block selection for element {element} is inconsistent: {detail}")]
    Selection { element: usize, detail: String },

    #[error("mass denominator near zero for element {element} at eigenvalue pair ({i}, {j})")]
    MassSingularity { element: usize, i: usize, j: usize },

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("free-surface iteration did not converge after {iterations} iterations (last change {last_change:.3e}): {diagnostics}")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        diagnostics: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Re-tag an element-level error with the global element id.
    pub(crate) fn with_element(self, id: usize) -> Self {
        match self {
            Error::Orientation { face, detail, .. } => Error::Orientation {
                element: id,
                face,
                detail,
            },
            Error::DegenerateElement { detail, .. } => Error::DegenerateElement {
                element: id,
                detail,
            },
            Error::Conditioning { condition, .. } => Error::Conditioning {
                element: id,
                condition,
            },
            Error::Decomposition { detail, .. } => Error::Decomposition {
                element: id,
                detail,
            },
            Error::ModalBasis { detail, .. } => Error::ModalBasis {
                element: id,
                detail,
            },
            Error::Selection { detail, .. } => Error::Selection {
                element: id,
                detail,
            },
            Error::MassSingularity { i, j, .. } => Error::MassSingularity { element: id, i, j },
            other => other,
        }
    }
}
