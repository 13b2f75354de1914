//! Numerical laboratory for fractional Sobolev seminorms on uniform grids.
//!
//! The crate discretizes functions on `h Z^N` restricted to a box, computes
//! the nonlocal Gagliardo energy, gradient energies, K-functionals between
//! `L^p` and the gradient seminorm, and the interpolation norm built from
//! them, and compares the sharp constants these produce (Poincaré constants,
//! capacities, Hardy inequalities) against each other on concrete domains.
//!
//! Everything is deterministic: summation orders are fixed, parallel
//! reductions use fixed block boundaries, and all randomized searches take
//! explicit seeds.

pub mod capacity;
pub mod constants;
pub mod domain;
pub mod error;
pub mod generate;
pub mod geometry;
pub mod hardy;
pub mod kfunctional;
pub mod norms;
pub mod params;
pub mod sum;

pub use capacity::{
    cap_local, cap_sp, default_capacity_box, flat_crack_law, int_cap_sp, CapacityResult,
    FlatCrackRow, FlatCrackTable,
};
pub use constants::{
    counterexample_sweep, doubleside_check, lambda1, lambda_interp_upper, lambda_s, mu_mixed,
    ConstantReport, CounterexampleRow, RayleighResult,
};
pub use domain::{Crack, DomainSpec, GridDomain, NodeStatus};
pub use hardy::{
    hardy_in_xnorm_check, hardy_margin, hardy_sharpness_curve, hardy_sides, picone_check,
    xnorm_hardy_sides, Profile1D,
};
pub use error::{Error, Result};
pub use generate::{bump, random_convex_polygon, random_modes};
pub use norms::{BoxField, GridFunction, MathConstants};
pub use params::FracParams;
