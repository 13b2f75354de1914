//! JSON run configurations, one strict schema per subcommand. Every numeric
//! range is validated here, before any compute starts, so a bad cell cannot
//! surface halfway through a sweep.

use std::sync::Arc;

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};

use fraclab::domain::{DomainSpec, GridDomain};
use fraclab::norms::GridFunction;
use fraclab::{bump, random_modes};

/// Grid-function families a config can request. Random families draw from
/// the run seed, so the same (config, seed) pair regenerates the same
/// function.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Zero,
    Bump { center: Vec<f64>, radius: f64 },
    RandomModes { modes: usize, max_freq: usize },
}

impl FunctionSpec {
    pub fn build(&self, d: &Arc<GridDomain>, seed: u64) -> Result<GridFunction> {
        Ok(match self {
            FunctionSpec::Zero => GridFunction::zeros(d.clone()),
            FunctionSpec::Bump { center, radius } => bump(d, center, *radius)?,
            FunctionSpec::RandomModes { modes, max_freq } => {
                random_modes(d, seed, *modes, *max_freq)?
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDomain {
    pub name: String,
    pub domain: DomainSpec,
}

/// Grid for `constants`: the full (domain, s, p) product is swept.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub domains: Vec<NamedDomain>,
    pub s_list: Vec<f64>,
    pub p_list: Vec<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    fraclab::params::SLACK_COMPARISON
}

impl ConstantsConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.domains.is_empty(), "need at least one domain");
        ensure!(!self.s_list.is_empty(), "need at least one s value");
        ensure!(!self.p_list.is_empty(), "need at least one p value");
        for &s in &self.s_list {
            check_s(s)?;
        }
        for &p in &self.p_list {
            check_p(p)?;
        }
        ensure!(
            self.slack >= 0.0 && self.slack < 1.0,
            "slack must lie in [0,1), got {}",
            self.slack
        );
        Ok(())
    }
}

/// Cracked-family sweep for `counterexample`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub dim: usize,
    pub ns: Vec<i64>,
    pub h: f64,
    pub s: f64,
    pub p: f64,
}

impl CounterexampleConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.dim == 1 || self.dim == 2, "dimension must be 1 or 2, got {}", self.dim);
        ensure!(!self.ns.is_empty(), "need at least one family index n");
        ensure!(self.ns.windows(2).all(|w| w[0] < w[1]), "family indices must be strictly increasing");
        ensure!(self.ns[0] >= 0, "family indices must be nonnegative");
        check_h(self.h)?;
        check_s(self.s)?;
        check_p(self.p)?;
        ensure!(
            self.s * self.p < 1.0,
            "the cracked family needs s*p < 1, got s*p = {}",
            self.s * self.p
        );
        Ok(())
    }
}

/// K(t) profile of one function on one domain over a geometric t-grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KProfileConfig {
    pub domain: DomainSpec,
    pub function: FunctionSpec,
    pub p: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl KProfileConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        ensure!(
            self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite(),
            "need 0 < t_min < t_max, got [{}, {}]",
            self.t_min,
            self.t_max
        );
        ensure!(self.per_decade >= 1, "need at least one t sample per decade");
        Ok(())
    }
}

/// One capacity evaluation (`fractional`, `local`, `interpolation`) or the
/// `flat_crack` thickness sweep. The target is a list of lattice-aligned
/// points; the box defaults to the standard truncation box around the target.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub kind: String,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub box_bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimizer_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs: Option<Vec<f64>>,
}

impl CapacityConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        match self.kind.as_str() {
            "fractional" | "interpolation" => {
                let s = self.require_s()?;
                check_s(s)?;
                self.validate_point_fields()?;
            }
            "local" => {
                ensure!(self.s.is_none(), "local capacity takes no s");
                self.validate_point_fields()?;
            }
            "flat_crack" => {
                let s = self.require_s()?;
                check_s(s)?;
                ensure!(
                    s * self.p < 1.0,
                    "the flat-crack law needs s*p < 1, got s*p = {}",
                    s * self.p
                );
                ensure!(
                    self.target.is_none() && self.box_bounds.is_none() && self.h.is_none(),
                    "flat_crack takes half_length/epsilons/hs, not target/box/h"
                );
                ensure!(self.minimizer_csv.is_none(), "flat_crack has no single minimizer");
                let a = self.half_length.unwrap_or(0.0);
                ensure!(a > 0.0 && a.is_finite(), "need a positive crack half_length");
                let eps = self.epsilons.as_deref().unwrap_or(&[]);
                let hs = self.hs.as_deref().unwrap_or(&[]);
                ensure!(!eps.is_empty(), "need at least one thickness epsilon");
                ensure!(!hs.is_empty(), "need at least one spacing h");
                for &e in eps {
                    ensure!(e > 0.0 && e.is_finite(), "thickness must be positive, got {e}");
                }
                for &h in hs {
                    check_h(h)?;
                }
            }
            other => bail!(
                "unknown capacity kind {other:?}; expected fractional, local, interpolation, or flat_crack"
            ),
        }
        Ok(())
    }

    fn require_s(&self) -> Result<f64> {
        match self.s {
            Some(s) => Ok(s),
            None => bail!("capacity kind {:?} needs s", self.kind),
        }
    }

    fn validate_point_fields(&self) -> Result<()> {
        ensure!(
            self.half_length.is_none() && self.epsilons.is_none() && self.hs.is_none(),
            "half_length/epsilons/hs belong to the flat_crack kind"
        );
        let h = match self.h {
            Some(h) => h,
            None => bail!("capacity kind {:?} needs the spacing h", self.kind),
        };
        check_h(h)?;
        let target = self.target.as_deref().unwrap_or(&[]);
        let dim = self.dim()?;
        for point in target {
            ensure!(
                point.len() == dim,
                "target points must share one dimension, got {} and {}",
                dim,
                point.len()
            );
            for &x in point {
                ensure!(x.is_finite(), "target coordinates must be finite");
            }
        }
        if let Some(bounds) = &self.box_bounds {
            ensure!(
                bounds.len() == dim,
                "box has {} axes on a {}-dimensional target",
                bounds.len(),
                dim
            );
        }
        ensure!(
            !target.is_empty() || self.box_bounds.is_some(),
            "an empty target needs an explicit box"
        );
        Ok(())
    }

    /// Dimension of the evaluation: from the target when present, otherwise
    /// from the explicit box.
    pub fn dim(&self) -> Result<usize> {
        if let Some(target) = &self.target {
            if let Some(first) = target.first() {
                ensure!(
                    first.len() == 1 || first.len() == 2,
                    "target points must have 1 or 2 coordinates, got {}",
                    first.len()
                );
                return Ok(first.len());
            }
        }
        if let Some(bounds) = &self.box_bounds {
            ensure!(
                bounds.len() == 1 || bounds.len() == 2,
                "box must have 1 or 2 axes, got {}",
                bounds.len()
            );
            return Ok(bounds.len());
        }
        bail!("need a target or a box to fix the dimension")
    }

    /// Converts the target coordinates to lattice nodes at spacing `h`,
    /// rejecting points that are not lattice-aligned.
    pub fn target_nodes(&self, h: f64) -> Result<Vec<[i64; 2]>> {
        let target = self.target.as_deref().unwrap_or(&[]);
        let mut nodes = Vec::with_capacity(target.len());
        for point in target {
            let mut node = [0i64; 2];
            for (ax, &x) in point.iter().enumerate() {
                let steps = x / h;
                let rounded = steps.round();
                ensure!(
                    (steps - rounded).abs() <= 1e-9 * steps.abs().max(1.0),
                    "target coordinate {x} is not a lattice multiple of h = {h}"
                );
                node[ax] = rounded as i64;
            }
            nodes.push(node);
        }
        Ok(nodes)
    }
}

/// Weighted-Hardy sweep: the margin of `f = t^(alpha/p) * ramp_delta` over
/// the (alpha, p, delta) grid, with delta sharpening left to right.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyConfig {
    pub alphas: Vec<f64>,
    pub p_list: Vec<f64>,
    pub deltas: Vec<f64>,
    pub t_min: f64,
    pub t_end: f64,
    pub per_decade: usize,
}

impl HardyConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.alphas.is_empty(), "need at least one alpha");
        ensure!(!self.p_list.is_empty(), "need at least one p value");
        ensure!(!self.deltas.is_empty(), "need at least one cutoff delta");
        for &a in &self.alphas {
            ensure!(a > 0.0 && a.is_finite(), "alpha must be positive, got {a}");
        }
        for &p in &self.p_list {
            check_p(p)?;
        }
        ensure!(
            self.deltas.windows(2).all(|w| w[0] > w[1]),
            "deltas must be strictly decreasing (mild to sharp)"
        );
        ensure!(
            self.t_min > 0.0 && self.t_end > self.t_min && self.t_end.is_finite(),
            "need 0 < t_min < t_end, got [{}, {}]",
            self.t_min,
            self.t_end
        );
        for &d in &self.deltas {
            ensure!(
                self.t_min < d && 2.0 * d < self.t_end,
                "delta {d} must satisfy t_min < delta and 2 delta < t_end"
            );
        }
        ensure!(self.per_decade >= 8, "need at least 8 quadrature points per decade");
        Ok(())
    }
}

/// Geometry table: scaled-distance margins for explicit and seeded random
/// convex polygons, plus cone eccentricities.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub polygons: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub random_polygons: usize,
    #[serde(default)]
    pub cone_betas: Vec<f64>,
    #[serde(default)]
    pub t_list: Vec<f64>,
    #[serde(default = "default_boundary_samples")]
    pub boundary_samples: usize,
}

fn default_boundary_samples() -> usize {
    512
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.polygons.is_empty() || self.random_polygons > 0 || !self.cone_betas.is_empty(),
            "need at least one polygon, random polygon, or cone"
        );
        if !self.polygons.is_empty() || self.random_polygons > 0 {
            ensure!(!self.t_list.is_empty(), "polygon rows need at least one t");
        }
        for &t in &self.t_list {
            ensure!(t > 0.0 && t < 1.0, "t must lie in (0,1), got {t}");
        }
        for &b in &self.cone_betas {
            ensure!((0.0..1.0).contains(&b), "cone beta must lie in [0,1), got {b}");
        }
        ensure!(self.boundary_samples >= 8, "need at least 8 boundary samples");
        Ok(())
    }
}

/// Diagnostic s-limit table of one function: the s-weighted seminorms next
/// to their classical limit terms.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SLimitsConfig {
    pub domain: DomainSpec,
    pub function: FunctionSpec,
    pub p: f64,
    pub s_list: Vec<f64>,
}

impl SLimitsConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        ensure!(!self.s_list.is_empty(), "need at least one s value");
        for &s in &self.s_list {
            check_s(s)?;
        }
        Ok(())
    }
}

fn check_s(s: f64) -> Result<()> {
    ensure!(s > 0.0 && s < 1.0, "s must lie in (0,1), got {s}");
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    ensure!(p > 1.0 && p.is_finite(), "p must lie in (1,inf), got {p}");
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    ensure!(h > 0.0 && h.is_finite(), "spacing must be positive, got {h}");
    Ok(())
}
