use thiserror::Error;

use crate::geometry::MeshId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape specification: {0}")]
    InvalidShape(String),

    #[error("point {point:?} is {distance:.3e} from the boundary, closer than the local mesh spacing {spacing:.3e}")]
    NearBoundary {
        point: Vec<f64>,
        distance: f64,
        spacing: f64,
    },

    #[error("geometric singularity: {0}")]
    Singular(String),

    #[error("operands are bound to different meshes ({left} vs {right})")]
    MeshMismatch { left: MeshId, right: MeshId },

    #[error("length {found} does not match mesh size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("ill-conditioned system: condition estimate {0:.3e}")]
    IllConditioned(f64),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
