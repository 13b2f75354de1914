//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid domain or run configuration (non-lattice geometry, bad ranges, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid numeric parameter (s outside (0,1), p <= 1, ...).
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Polygon with fewer than three vertices, wrong orientation, or collinear chain.
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    /// Iterative solver stopped above its tolerance; carries the best value found.
    #[error("solver did not converge: best value {best:.6e}, optimality gap {gap:.3e}")]
    NoConvergence { best: f64, gap: f64 },

    /// Domain pair handed to a monotonicity check is not nested on a common lattice.
    #[error("domains are not nested on a common lattice: {0}")]
    NotNested(String),

    /// Capacity target set is empty.
    #[error("capacity target set is empty")]
    EmptyTarget,

    /// Capacity target node falls outside the box or on a constrained node.
    #[error("capacity target lies outside the free nodes of the box: {0}")]
    TargetOutsideBox(String),

    /// Problem size exceeds a documented hard limit.
    #[error("instance too large: {size} free nodes exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
