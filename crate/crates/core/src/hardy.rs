//! Weighted one-dimensional Hardy inequality on sampled profiles, the
//! pointwise Picone inequality its proof rests on, and the specific Hardy
//! step used inside the interpolation-norm comparison.
//!
//! All integrals carry the measure `dt/t`, so quadrature is trapezoid in
//! `ln t`, which is exact scale-invariance: geometric grids get uniform
//! weights. Profiles carry explicit derivative samples rather than inferring
//! them, so an inequality margin reported here measures the inequality and
//! not a differentiation error.

use crate::error::{Error, Result};
use crate::norms::{powp, powp_prime};
use crate::params::FracParams;

/// A sampled function on `(0, T]`: strictly increasing positive nodes with
/// value and derivative samples. Structural validity (ordering, finiteness)
/// is enforced at construction; analytic requirements like vanishing near
/// zero or positivity are checked by the operations that need them.
#[derive(Debug, Clone)]
pub struct Profile1D {
    t: Vec<f64>,
    f: Vec<f64>,
    fp: Vec<f64>,
    t_end: f64,
}

impl Profile1D {
    pub fn new(
        t_nodes: Vec<f64>,
        f_values: Vec<f64>,
        fprime_values: Vec<f64>,
        t_end: f64,
    ) -> Result<Self> {
        let n = t_nodes.len();
        if n < 2 || f_values.len() != n || fprime_values.len() != n {
            return Err(Error::Param(format!(
                "profile needs at least two nodes and matching lengths, got {n}, {}, {}",
                f_values.len(),
                fprime_values.len()
            )));
        }
        if !(t_nodes[0] > 0.0) {
            return Err(Error::Param(format!(
                "profile nodes must be positive, first is {}",
                t_nodes[0]
            )));
        }
        if t_nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Param("profile nodes must be strictly increasing".into()));
        }
        if !t_end.is_finite() || *t_nodes.last().unwrap() > t_end {
            return Err(Error::Param(format!(
                "profile nodes must stay within (0, {t_end}]"
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&t_nodes) || !finite(&f_values) || !finite(&fprime_values) {
            return Err(Error::Param("profile samples must be finite".into()));
        }
        Ok(Profile1D { t: t_nodes, f: f_values, fp: fprime_values, t_end })
    }

    /// Samples `f` and its derivative on a geometric grid from `t_min` to
    /// `t_end` with the given resolution per decade.
    pub fn geometric(
        t_min: f64,
        t_end: f64,
        per_decade: usize,
        f: impl Fn(f64) -> f64,
        fprime: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(t_min > 0.0) || !(t_end > t_min) || !t_end.is_finite() {
            return Err(Error::Param(format!(
                "geometric profile needs 0 < t_min < t_end, got [{t_min}, {t_end}]"
            )));
        }
        if per_decade == 0 {
            return Err(Error::Param("per_decade must be at least 1".into()));
        }
        let decades = (t_end / t_min).log10();
        let n = (per_decade as f64 * decades).ceil() as usize;
        let mut t = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let x = k as f64 / n as f64;
            t.push(t_min * (t_end / t_min).powf(x));
        }
        *t.last_mut().unwrap() = t_end;
        let fv: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        let fpv: Vec<f64> = t.iter().map(|&x| fprime(x)).collect();
        Profile1D::new(t, fv, fpv, t_end)
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    pub fn fprime_values(&self) -> &[f64] {
        &self.fp
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Largest mismatch between the provided derivative and the finite
    /// difference of the values, per interval and relative to the profile's
    /// largest slope. Fine geometric grids on smooth profiles sit below
    /// 1e-6; a large value means the profile lies about its derivative.
    pub fn fd_inconsistency(&self) -> f64 {
        let scale = self.fp.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if scale == 0.0 {
            return if self.f.iter().any(|&x| x != self.f[0]) { f64::INFINITY } else { 0.0 };
        }
        let mut worst = 0.0f64;
        for i in 0..self.t.len() - 1 {
            let dt = self.t[i + 1] - self.t[i];
            let df = self.f[i + 1] - self.f[i];
            let pred = 0.5 * (self.fp[i] + self.fp[i + 1]) * dt;
            worst = worst.max((df - pred).abs() / (dt * scale));
        }
        worst
    }
}

/// Trapezoid quadrature of `Σ vals dt/t` over the given nodes, i.e. plain
/// trapezoid in `ln t`.
fn trapezoid_ln(t: &[f64], vals: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..t.len() - 1 {
        total += 0.5 * (vals[i] + vals[i + 1]) * (t[i + 1] / t[i]).ln();
    }
    total
}

fn check_alpha_p(alpha: f64, p: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Param(format!("alpha must be positive, got {alpha}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Param(format!("p must lie in (1, inf), got {p}")));
    }
    Ok(())
}

/// The two sides of the weighted Hardy inequality for the profile:
/// `(lhs, rhs) = (∫ |f|^p t^{-alpha} dt/t, ∫ |f'|^p t^{p-alpha} dt/t)`.
/// The profile must vanish at its first node (value and derivative), the
/// sampled form of vanishing identically near zero; the untabulated head
/// `(0, t_0]` then contributes nothing to either side.
pub fn hardy_sides(f: &Profile1D, alpha: f64, p: f64) -> Result<(f64, f64)> {
    check_alpha_p(alpha, p)?;
    if f.f[0] != 0.0 || f.fp[0] != 0.0 {
        return Err(Error::Param(format!(
            "hardy profile must vanish near zero: first node carries f = {}, f' = {}",
            f.f[0], f.fp[0]
        )));
    }
    let lhs_vals: Vec<f64> = f.t.iter().zip(&f.f).map(|(&t, &v)| powp(v, p) * t.powf(-alpha)).collect();
    let rhs_vals: Vec<f64> =
        f.t.iter().zip(&f.fp).map(|(&t, &v)| powp(v, p) * t.powf(p - alpha)).collect();
    Ok((trapezoid_ln(&f.t, &lhs_vals), trapezoid_ln(&f.t, &rhs_vals)))
}

/// Margin of the weighted Hardy inequality,
/// `∫ |f'|^p t^{p-alpha} dt/t  -  (alpha/p)^p ∫ |f|^p t^{-alpha} dt/t`.
/// Nonnegative up to quadrature error for every admissible profile; the
/// constant is sharp, approached by `t^{alpha/p}` with a sharpening cutoff.
pub fn hardy_margin(f: &Profile1D, alpha: f64, p: f64) -> Result<f64> {
    let (lhs, rhs) = hardy_sides(f, alpha, p)?;
    Ok(rhs - (alpha / p).powf(p) * lhs)
}

/// Relative margins `margin/rhs` for the near-extremal family
/// `f = t^{alpha/p} · cutoff_delta` as the cutoff location `delta` sweeps the
/// given list. Sharpening the cutoff (smaller `delta`) drives the relative
/// margin toward zero, exhibiting the sharpness of the constant.
pub fn hardy_sharpness_curve(
    alpha: f64,
    p: f64,
    deltas: &[f64],
    t_min: f64,
    t_end: f64,
    per_decade: usize,
) -> Result<Vec<f64>> {
    check_alpha_p(alpha, p)?;
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > t_min) || !(2.0 * delta < t_end) {
            return Err(Error::Param(format!(
                "cutoff delta = {delta} must satisfy t_min < delta and 2 delta < t_end"
            )));
        }
        let beta = alpha / p;
        // Quintic ramp: twice continuously differentiable, so the trapezoid
        // quadrature keeps its second-order accuracy across the cutoff.
        let cut = move |t: f64| -> (f64, f64) {
            let x = ((t - delta) / delta).clamp(0.0, 1.0);
            (
                x * x * x * (10.0 - 15.0 * x + 6.0 * x * x),
                30.0 * x * x * (1.0 - x) * (1.0 - x) / delta,
            )
        };
        let profile = Profile1D::geometric(
            t_min,
            t_end,
            per_decade,
            |t| t.powf(beta) * cut(t).0,
            |t| {
                let (c, cp) = cut(t);
                beta * t.powf(beta - 1.0) * c + t.powf(beta) * cp
            },
        )?;
        let (lhs, rhs) = hardy_sides(&profile, alpha, p)?;
        out.push((rhs - (alpha / p).powf(p) * lhs) / rhs);
    }
    Ok(out)
}

/// Pointwise Picone inequality: for `u > 0` and `v >= 0` with derivatives,
/// `|u'|^{p-2} u' (v^p / u^{p-1})' <= |v'|^p` at every node. Returns the
/// minimum over nodes of the gap `|v'|^p - |u'|^{p-2} u' (v^p/u^{p-1})'`,
/// with the quotient differentiated by the product rule on the provided
/// samples, so the gap vanishes identically when `v` is a multiple of `u`.
pub fn picone_check(u: &Profile1D, v: &Profile1D, p: f64) -> Result<f64> {
    check_alpha_p(1.0, p)?;
    if u.t.len() != v.t.len() || u.t.iter().zip(&v.t).any(|(a, b)| a != b) {
        return Err(Error::Param("picone profiles must share the same nodes".into()));
    }
    if u.f.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Param("picone needs u strictly positive at every node".into()));
    }
    if v.f.iter().any(|&x| x < 0.0) {
        return Err(Error::Param("picone needs v nonnegative".into()));
    }
    let mut min_gap = f64::INFINITY;
    for i in 0..u.t.len() {
        let r = v.f[i] / u.f[i];
        let q_prime = r.powf(p - 1.0) * (p * v.fp[i] + (1.0 - p) * r * u.fp[i]);
        let gap = powp(v.fp[i], p) - powp_prime(u.fp[i], p) * q_prime;
        min_gap = min_gap.min(gap);
    }
    Ok(min_gap)
}

fn check_xnorm_samples(ts: &[f64], u_bar: &[f64]) -> Result<()> {
    if ts.len() < 2 || ts.len() != u_bar.len() {
        return Err(Error::Param(format!(
            "need at least two matching samples, got {} nodes and {} values",
            ts.len(),
            u_bar.len()
        )));
    }
    if !(ts[0] > 0.0) || ts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Param("sample times must be positive and strictly increasing".into()));
    }
    if u_bar.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Param("averaged modulus samples must be finite and nonnegative".into()));
    }
    Ok(())
}

/// The two sides of the Hardy step inside the interpolation-norm comparison:
/// for the primitive `g(t) = ∫_0^t u_bar`, returns
/// `(∫ g^p t^{-p-sp} dt/t, ∫ (u_bar/t^s)^p dt/t)`.
/// The primitive is cumulative trapezoid; the untabulated head uses the
/// rectangle rule `g(t_0) = t_0 u_bar(t_0)`, which can only overestimate a
/// modulus vanishing at zero, tightening the reported margin.
pub fn xnorm_hardy_sides(ts: &[f64], u_bar: &[f64], fp: &FracParams) -> Result<(f64, f64)> {
    check_xnorm_samples(ts, u_bar)?;
    let (s, p) = (fp.s, fp.p);
    let alpha = p + fp.sp();
    let mut g = vec![0.0; ts.len()];
    g[0] = ts[0] * u_bar[0];
    for i in 1..ts.len() {
        g[i] = g[i - 1] + 0.5 * (u_bar[i] + u_bar[i - 1]) * (ts[i] - ts[i - 1]);
    }
    let lhs_vals: Vec<f64> =
        ts.iter().zip(&g).map(|(&t, &v)| powp(v, p) * t.powf(-alpha)).collect();
    let rhs_vals: Vec<f64> =
        ts.iter().zip(u_bar).map(|(&t, &v)| powp(v, p) * t.powf(-s * p)).collect();
    Ok((trapezoid_ln(ts, &lhs_vals), trapezoid_ln(ts, &rhs_vals)))
}

/// Margin of the Hardy step with `alpha = p + sp`:
/// `∫ (u_bar/t^s)^p dt/t - (1+s)^p ∫ g^p t^{-p-sp} dt/t`, nonnegative up to
/// quadrature error whenever `u_bar` vanishes at small times, as every
/// averaged continuity modulus does.
pub fn hardy_in_xnorm_check(ts: &[f64], u_bar: &[f64], fp: &FracParams) -> Result<f64> {
    let (lhs, rhs) = xnorm_hardy_sides(ts, u_bar, fp)?;
    Ok(rhs - (1.0 + fp.s).powf(fp.p) * lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::TOL_QUAD;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(t: f64, delta: f64) -> (f64, f64) {
        let x = ((t - delta) / delta).clamp(0.0, 1.0);
        (
            x * x * x * (10.0 - 15.0 * x + 6.0 * x * x),
            30.0 * x * x * (1.0 - x) * (1.0 - x) / delta,
        )
    }

    fn cutoff_profile(alpha: f64, p: f64, delta: f64, t_min: f64, t_end: f64) -> Profile1D {
        let beta = alpha / p;
        Profile1D::geometric(
            t_min,
            t_end,
            256,
            move |t| t.powf(beta) * ramp(t, delta).0,
            move |t| {
                let (c, cp) = ramp(t, delta);
                beta * t.powf(beta - 1.0) * c + t.powf(beta) * cp
            },
        )
        .unwrap()
    }

    #[test]
    fn profile_rejects_bad_structure() {
        let t = vec![0.1, 0.2, 0.4];
        let v = vec![0.0, 1.0, 2.0];
        assert!(Profile1D::new(vec![0.2, 0.1, 0.4], v.clone(), v.clone(), 1.0).is_err());
        assert!(Profile1D::new(vec![-0.1, 0.2, 0.4], v.clone(), v.clone(), 1.0).is_err());
        assert!(Profile1D::new(t.clone(), vec![0.0, 1.0], v.clone(), 1.0).is_err());
        assert!(Profile1D::new(t.clone(), v.clone(), v.clone(), 0.3).is_err());
        assert!(Profile1D::new(t.clone(), vec![0.0, f64::NAN, 2.0], v.clone(), 1.0).is_err());
        assert!(Profile1D::new(t, v.clone(), v, 1.0).is_ok());
    }

    #[test]
    fn margin_is_zero_for_the_zero_profile() {
        let zero = Profile1D::geometric(1e-3, 1.0, 64, |_| 0.0, |_| 0.0).unwrap();
        for p in [1.5, 2.0, 3.0] {
            assert_eq!(hardy_margin(&zero, 0.7, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn margin_requires_vanishing_near_zero() {
        let flat = Profile1D::geometric(1e-3, 1.0, 64, |_| 1.0, |_| 0.0).unwrap();
        assert!(hardy_margin(&flat, 0.7, 2.0).is_err());
        let ramp = Profile1D::geometric(1e-3, 1.0, 64, |t| t, |_| 1.0).unwrap();
        assert!(hardy_margin(&ramp, 0.7, 2.0).is_err());
    }

    #[test]
    fn margin_nonnegative_across_alpha_p_grid() {
        // Smooth admissible profiles, one flat-near-zero power above the
        // extremal exponent per (alpha, p).
        for p in [1.5, 2.0, 3.0] {
            for alpha in [0.5, p - 1.0, p + 0.5 * p] {
                if !(alpha > 0.0) {
                    continue;
                }
                let f = cutoff_profile(alpha, p, 1e-2, 1e-4, 1.0);
                let (lhs, rhs) = hardy_sides(&f, alpha, p).unwrap();
                let margin = rhs - (alpha / p).powf(p) * lhs;
                assert!(
                    margin >= -TOL_QUAD * rhs,
                    "alpha={alpha} p={p}: margin {margin} vs rhs {rhs}"
                );
            }
        }
    }

    #[test]
    fn classical_constant_is_approached_by_sharp_cutoffs() {
        // alpha = p - 1, p = 2: constant (1/2)^2 = 1/4. Sharpening the
        // cutoff pushes the relative margin monotonically toward zero; the
        // near-extremal power is non-integrable at both ends, so the decay
        // is logarithmic in the cutoff location.
        let ratios = hardy_sharpness_curve(
            1.0,
            2.0,
            &[1e-1, 1e-2, 1e-4, 1e-8, 1e-16, 1e-24],
            1e-26,
            1.0,
            128,
        )
        .unwrap();
        for w in ratios.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "sharpness curve must not increase: {ratios:?}");
        }
        assert!(ratios[0] > 0.3, "blunt cutoff should be far from extremal: {ratios:?}");
        let last = *ratios.last().unwrap();
        assert!(last < 0.2, "sharp cutoff should approach the extremal: {ratios:?}");
        assert!(last <= 0.3 * ratios[0], "no clear decay: {ratios:?}");
        for &r in &ratios {
            assert!(r >= -TOL_QUAD);
        }
    }

    #[test]
    fn quadrature_margin_converges_under_grid_doubling() {
        // Second-order trapezoid: doubling the resolution shrinks the margin
        // change by about four.
        let margin_at = |per_decade: usize| -> f64 {
            let f = Profile1D::geometric(
                1e-4,
                1.0,
                per_decade,
                |t| t * ramp(t, 1e-2).0,
                |t| {
                    let (c, cp) = ramp(t, 1e-2);
                    c + t * cp
                },
            )
            .unwrap();
            hardy_margin(&f, 1.2, 2.0).unwrap()
        };
        let coarse = margin_at(64);
        let mid = margin_at(128);
        let fine = margin_at(512);
        let c1 = (coarse - fine).abs();
        let c2 = (mid - fine).abs();
        assert!(c2 <= 0.4 * c1, "no second-order trend: {c1} vs {c2}");
        assert!(c2 <= TOL_QUAD * fine.abs());
    }

    #[test]
    fn picone_equality_for_multiples_and_zero() {
        let u = Profile1D::geometric(0.01, 10.0, 64, |t| 1.2 + (t).sin() * 0.4, |t| 0.4 * t.cos())
            .unwrap();
        for p in [1.5, 2.0, 3.0] {
            let v = Profile1D::new(
                u.t_nodes().to_vec(),
                u.f_values().iter().map(|x| 3.0 * x).collect(),
                u.fprime_values().iter().map(|x| 3.0 * x).collect(),
                u.t_end(),
            )
            .unwrap();
            let scale: f64 =
                v.fprime_values().iter().map(|&x| powp(x, p)).fold(0.0, f64::max);
            let gap = picone_check(&u, &v, p).unwrap();
            assert!(gap.abs() <= 1e-10 * scale, "p={p}: equality gap {gap}");

            let zero = Profile1D::new(
                u.t_nodes().to_vec(),
                vec![0.0; u.t_nodes().len()],
                vec![0.0; u.t_nodes().len()],
                u.t_end(),
            )
            .unwrap();
            assert_eq!(picone_check(&u, &zero, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn picone_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9ACE);
        for p in [1.5, 2.0, 3.0] {
            for _ in 0..20 {
                let (a1, w1, c1) = (rng.gen_range(0.1..0.5), rng.gen_range(0.5..4.0), rng.gen_range(0.0..6.28));
                let (a2, w2, c2) = (rng.gen_range(0.1..0.8), rng.gen_range(0.5..4.0), rng.gen_range(0.0..6.28));
                let u = Profile1D::geometric(
                    0.01,
                    10.0,
                    64,
                    |t| 1.0 + a1 + a1 * (w1 * t + c1).sin(),
                    |t| a1 * w1 * (w1 * t + c1).cos(),
                )
                .unwrap();
                let v = Profile1D::geometric(
                    0.01,
                    10.0,
                    64,
                    |t| a2 * (1.0 + (w2 * t + c2).sin()),
                    |t| a2 * w2 * (w2 * t + c2).cos(),
                )
                .unwrap();
                let scale: f64 =
                    v.fprime_values().iter().map(|&x| powp(x, p)).fold(0.0, f64::max);
                let gap = picone_check(&u, &v, p).unwrap();
                assert!(gap >= -1e-6 * scale.max(1.0), "p={p}: gap {gap}");
            }
        }
    }

    #[test]
    fn picone_rejects_invalid_inputs() {
        let u = Profile1D::geometric(0.01, 10.0, 16, |t| t, |_| 1.0).unwrap();
        let v = Profile1D::geometric(0.01, 10.0, 16, |t| -t, |_| -1.0).unwrap();
        assert!(picone_check(&v, &u, 2.0).is_err(), "u must be positive");
        assert!(picone_check(&u, &v, 2.0).is_err(), "v must be nonnegative");
        let other = Profile1D::geometric(0.02, 10.0, 16, |t| t, |_| 1.0).unwrap();
        assert!(picone_check(&u, &other, 2.0).is_err(), "grids must match");
    }

    #[test]
    fn derivative_consistency_at_fine_resolution() {
        let f = Profile1D::geometric(
            1e-3,
            1.0,
            12000,
            |t| t.powf(0.7) * ramp(t, 1e-2).0,
            |t| {
                let (c, cp) = ramp(t, 1e-2);
                0.7 * t.powf(-0.3) * c + t.powf(0.7) * cp
            },
        )
        .unwrap();
        let r = f.fd_inconsistency();
        assert!(r <= 1e-6, "fd inconsistency {r}");
        // A lying derivative is flagged at any resolution.
        let lying = Profile1D::new(
            f.t_nodes().to_vec(),
            f.f_values().to_vec(),
            f.fprime_values().iter().map(|x| x * 1.5).collect(),
            f.t_end(),
        )
        .unwrap();
        assert!(lying.fd_inconsistency() > 1e-2);
    }

    #[test]
    fn xnorm_hardy_zero_and_linear_closed_form() {
        let fp = FracParams::new(0.4, 2.0).unwrap();
        let ts: Vec<f64> = (0..=512)
            .map(|k| 1e-3 * (1.0 / 1e-3f64).powf(k as f64 / 512.0))
            .collect();
        let zeros = vec![0.0; ts.len()];
        assert_eq!(hardy_in_xnorm_check(&ts, &zeros, &fp).unwrap(), 0.0);

        // u_bar = c t: the cumulative trapezoid and the rectangle head make
        // g = c t^2 / 2 + c t_0^2 / 2 exactly; both sides have closed forms.
        let c = 0.7;
        let u_bar: Vec<f64> = ts.iter().map(|&t| c * t).collect();
        let (lhs, rhs) = xnorm_hardy_sides(&ts, &u_bar, &fp).unwrap();
        let (s, p) = (fp.s, fp.p);
        let e = p - fp.sp();
        let t0 = ts[0];
        let t1 = *ts.last().unwrap();
        let rhs_cf = powp(c, p) * (t1.powf(e) - t0.powf(e)) / e;
        let lhs_cf = powp(c / 2.0, p) * (t1.powf(e) - t0.powf(e)) / e;
        assert!((rhs - rhs_cf).abs() <= 1e-3 * rhs_cf, "{rhs} vs {rhs_cf}");
        assert!((lhs - lhs_cf).abs() <= 2e-3 * lhs_cf, "{lhs} vs {lhs_cf}");
        let margin = rhs - (1.0 + s).powf(p) * lhs;
        let margin_cf = rhs_cf - (1.0 + s).powf(p) * lhs_cf;
        assert!(margin > 0.0);
        assert!((margin - margin_cf).abs() <= 1e-2 * rhs_cf);
    }

    #[test]
    fn xnorm_hardy_nonnegative_for_grid_modulus() {
        // u_bar computed as the averaged L^p shift modulus of a discrete
        // bump, evaluated directly from the definition.
        let fp = FracParams::new(0.4, 2.0).unwrap();
        let h = 1.0 / 64.0;
        let n = 127usize;
        let u: Vec<f64> = (1..=n)
            .map(|i| {
                let x = i as f64 * h - 1.0;
                (-1.0 / (1.0 - x * x).max(1e-9)).exp()
            })
            .collect();
        let mut ts = Vec::new();
        let mut u_bar = Vec::new();
        for k in 1..=96usize {
            let mut acc = 0.0;
            for i in 0..n + k {
                let a = if i < n { u[i] } else { 0.0 };
                let b = if i >= k && i - k < n { u[i - k] } else { 0.0 };
                acc += powp(a - b, fp.p);
            }
            ts.push(k as f64 * h);
            u_bar.push((h * acc).powf(1.0 / fp.p));
        }
        let (_, rhs) = xnorm_hardy_sides(&ts, &u_bar, &fp).unwrap();
        let margin = hardy_in_xnorm_check(&ts, &u_bar, &fp).unwrap();
        assert!(margin >= -TOL_QUAD * rhs, "margin {margin} vs rhs {rhs}");
    }
}
