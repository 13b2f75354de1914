//! Fractional parameters and centrally pinned tolerances.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Differentiability order `s` in (0,1) and integrability `p` in (1,inf).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub s: f64,
    pub p: f64,
}

impl FracParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Param(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Param(format!("p must lie in (1,inf), got {p}")));
        }
        Ok(FracParams { s, p })
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }
}

/// Relative tolerance of the K-functional solver.
pub const TOL_K: f64 = 1e-8;
/// Relative tolerance of eigenvalue / Rayleigh-quotient solvers.
pub const TOL_EIG: f64 = 1e-8;
/// Relative optimality tolerance of capacity solvers.
pub const TOL_CAP: f64 = 1e-6;
/// Relative tolerance of one-dimensional quadratures.
pub const TOL_QUAD: f64 = 1e-4;
/// Absolute tolerance of exact geometric predicates.
pub const TOL_GEOM: f64 = 1e-9;

/// Default slack factor on comparison inequalities (5%).
pub const SLACK_COMPARISON: f64 = 0.05;
/// Default slack factor on the Poincare-constant sandwich (10%).
pub const SLACK_EQUIVALENCE: f64 = 0.10;

/// Default number of K-functional samples per decade of t.
pub const T_PER_DECADE: usize = 64;
/// Default number of random restarts for non-quadratic Rayleigh descent.
pub const EIG_RESTARTS: usize = 8;
/// Default number of angular samples for spherical averages in dimension 2.
pub const SPHERICAL_ANGLES: usize = 32;
/// Default ratio of capacity box side to the diameter of the target set.
pub const CAP_BOX_FACTOR: f64 = 8.0;
/// Head + tail of the t-integral must stay below this fraction of the quadrature part.
pub const XNORM_TAIL_FRACTION: f64 = 1e-3;
/// Largest active-node count the dense eigensolver paths accept.
pub const EIG_MAX_DENSE: usize = 4096;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(FracParams::new(0.0, 2.0).is_err());
        assert!(FracParams::new(1.0, 2.0).is_err());
        assert!(FracParams::new(0.5, 1.0).is_err());
        assert!(FracParams::new(0.5, f64::INFINITY).is_err());
        assert!(FracParams::new(0.3, 1.5).is_ok());
    }
}
