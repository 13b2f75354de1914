//! Reproducible test-function families on a grid domain: the classical
//! smooth bump and seeded sums of separable sine modes. Both vanish outside
//! their support (the bump by construction, the modes on the box hull), so
//! they feed every zero-extension quantity in the crate directly.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::geometry::ConvexPolygon;
use crate::norms::GridFunction;

/// Smooth bump `exp(1 - 1/(1 - r^2))` with `r = |x - center| / radius`,
/// normalized to peak value 1 at the center and identically zero for
/// `r >= 1`. Compactly supported and C-infinity, so it is the canonical
/// probe for bounds that assume support strictly inside the box.
pub fn bump(d: &Arc<GridDomain>, center: &[f64], radius: f64) -> Result<GridFunction> {
    if center.len() != d.dim() {
        return Err(Error::Param(format!(
            "bump center has {} coordinates on a {}-dimensional domain",
            center.len(),
            d.dim()
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Param(format!("bump radius must be positive, got {radius}")));
    }
    let center = center.to_vec();
    Ok(GridFunction::from_fn(d.clone(), move |x| {
        let r2 = x
            .iter()
            .zip(&center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
            / (radius * radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    }))
}

/// Seeded random combination of `n_modes` separable sine modes
/// `prod_d sin(k_d pi (x_d - lo_d) / L_d)` with per-axis frequencies
/// `k_d <= max_freq` and amplitudes uniform in `[-1, 1]`, over the node
/// hull `[lo_d h, hi_d h]` of the domain. Every mode vanishes on the hull,
/// so the sample is compatible with the zero boundary of Dirichlet boxes.
/// The same `(domain, seed, n_modes, max_freq)` always returns the same
/// function.
pub fn random_modes(
    d: &Arc<GridDomain>,
    seed: u64,
    n_modes: usize,
    max_freq: usize,
) -> Result<GridFunction> {
    if n_modes == 0 {
        return Err(Error::Param("need at least one mode".into()));
    }
    if max_freq == 0 {
        return Err(Error::Param("need max_freq >= 1".into()));
    }
    let dim = d.dim();
    let h = d.h();
    let lo = d.lo();
    let hi = d.hi();
    let origin: Vec<f64> = (0..dim).map(|ax| lo[ax] as f64 * h).collect();
    let len: Vec<f64> = (0..dim).map(|ax| (hi[ax] - lo[ax]) as f64 * h).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps = Vec::with_capacity(n_modes);
    let mut freqs = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        amps.push(rng.gen_range(-1.0..1.0));
        freqs.push((0..dim).map(|_| rng.gen_range(1..=max_freq) as f64).collect::<Vec<_>>());
    }
    Ok(GridFunction::from_fn(d.clone(), move |x| {
        let mut total = 0.0;
        for (a, k) in amps.iter().zip(&freqs) {
            let mut mode = *a;
            for ax in 0..dim {
                let phase = k[ax] * std::f64::consts::PI * (x[ax] - origin[ax]) / len[ax];
                mode *= phase.sin();
            }
            total += mode;
        }
        total
    }))
}

/// Seeded random convex polygon: 5 to 10 vertices placed counterclockwise on
/// a randomly scaled, rotated, and shifted ellipse, with jittered but sorted
/// angles. Points on an ellipse at distinct angles are strictly convex, so
/// construction never degenerates.
pub fn random_convex_polygon(seed: u64) -> Result<ConvexPolygon> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(5..=10usize);
    let a = rng.gen_range(0.5..2.0);
    let b = rng.gen_range(0.5..2.0);
    let rot = rng.gen_range(0.0..std::f64::consts::TAU);
    let cx = rng.gen_range(-1.0..1.0);
    let cy = rng.gen_range(-1.0..1.0);
    let step = std::f64::consts::TAU / n as f64;
    let vertices = (0..n)
        .map(|i| {
            let phi = step * i as f64 + rng.gen_range(-0.3..0.3) * step;
            let (ex, ey) = (a * phi.cos(), b * phi.sin());
            [
                cx + ex * rot.cos() - ey * rot.sin(),
                cy + ex * rot.sin() + ey * rot.cos(),
            ]
        })
        .collect();
    ConvexPolygon::new(vertices)
}
