//! Sharp constants of the discrete Poincaré inequalities: the gradient
//! constant `lambda1`, the fractional constant `lambda_s`, the mixed
//! natural/zero constant `mu_mixed` of a cracked cell, and an upper bound for
//! the interpolation-norm quotient. All four are Rayleigh minima; the returned
//! value is always the true quotient of the returned minimizer, so every
//! result can be certified independently with the public norm functions.
//!
//! For `p = 2` each quotient is the smallest eigenvalue of a symmetric form,
//! found by inverse iteration on the integer (prefactor-free) matrix; for
//! general `p` a normalized descent with multiple restarts is used. Working
//! prefactor-free keeps dilated domains on bit-identical solver trajectories,
//! which makes the exact scaling laws testable at roundoff accuracy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::kfunctional::{x_norm_auto_with, EnvelopeCase, GradStencil, KSolver, Spectral};
use crate::norms::{
    gagliardo_global_pow, grad_seminorm_box_pow, grad_seminorm_pow, lp_norm, lp_norm_pow, powp,
    powp_prime, GridFunction, KernelTable, MathConstants,
};
use crate::params::{FracParams, EIG_MAX_DENSE, EIG_RESTARTS};

/// Where the general-p interpolation-quotient descent becomes too expensive:
/// every objective evaluation rebuilds a scalarization frontier.
const INTERP_MAX_GENERAL: usize = 512;

/// Outcome of a Rayleigh minimization. `value` is the quotient of `minimizer`
/// evaluated with the public norm functions; `spread` is the relative gap
/// between the best and worst restart; `certificate_gap` is the relative gap
/// between the solver-internal estimate and the recomputed quotient.
#[derive(Debug, Clone)]
pub struct RayleighResult {
    pub value: f64,
    pub minimizer: GridFunction,
    pub spread: f64,
    pub certificate_gap: f64,
}

/// Both Poincaré constants of one domain plus the residuals of the
/// constant-comparison inequalities they enter.
#[derive(Debug, Clone)]
pub struct ConstantReport {
    pub s: f64,
    pub p: f64,
    pub lambda1: f64,
    pub lambda_s: f64,
    pub lambda_interp_upper: f64,
    /// `s(1-s) * lambda_interp_upper - lambda1^s`, signed.
    pub residual_equivalence: f64,
    /// `2^{p(1-s)} N omega_N lambda1^s - s(1-s) lambda_s`, signed.
    pub residual_oneside: f64,
    /// The tracked ratio `lambda1^s / (s(1-s) lambda_s)`.
    pub residual_twosideconv: f64,
    pub minimizer_lambda1: GridFunction,
    pub minimizer_lambda_s: GridFunction,
}

/// One row of the cracked-family sweep.
#[derive(Debug, Clone)]
pub struct CounterexampleRow {
    pub n: i64,
    pub lambda1: f64,
    pub lambda_s: f64,
    pub mu_cell: f64,
    /// `lambda1^s / lambda_s`, the quantity that separates as `n` grows.
    pub ratio: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Param(format!("p must lie in (1, inf), got {p}")));
    }
    Ok(())
}

fn check_active(d: &GridDomain) -> Result<()> {
    if d.active_count() == 0 {
        return Err(Error::EmptyTarget);
    }
    Ok(())
}

fn check_dense_size(d: &GridDomain) -> Result<()> {
    let n = d.active_count();
    if n > EIG_MAX_DENSE {
        return Err(Error::TooLarge { size: n, limit: EIG_MAX_DENSE });
    }
    Ok(())
}

/// Integer Dirichlet graph Laplacian on the active set: every lattice edge
/// incident to an active node counts, neighbours outside the active set are
/// zero, so the diagonal is always `2 dim`.
fn dirichlet_graph_laplacian(d: &GridDomain) -> DMatrix<f64> {
    let n = d.active_count();
    let dim = d.dim();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let node = d.node_of(d.active_box_index(a));
        l[(a, a)] = 2.0 * dim as f64;
        for ax in 0..dim {
            for dir in [-1i64, 1] {
                let mut nb = node;
                nb[ax] += dir;
                if let Some(bj) = d.box_index(nb) {
                    if let Some(aj) = d.active_index(bj) {
                        l[(a, aj)] = -1.0;
                    }
                }
            }
        }
    }
    l
}

/// Integer graph Laplacian of the box with natural (no-flux) walls: only
/// edges between two box nodes count, and constrained box nodes (the crack)
/// act as zeros, contributing to their neighbours' diagonals only.
fn natural_graph_laplacian(d: &GridDomain) -> DMatrix<f64> {
    let n = d.active_count();
    let dim = d.dim();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let node = d.node_of(d.active_box_index(a));
        for ax in 0..dim {
            for dir in [-1i64, 1] {
                let mut nb = node;
                nb[ax] += dir;
                if let Some(bj) = d.box_index(nb) {
                    l[(a, a)] += 1.0;
                    if let Some(aj) = d.active_index(bj) {
                        l[(a, aj)] = -1.0;
                    }
                }
            }
        }
    }
    l
}

/// Kernel weights from each active node to every non-active box node; these
/// are the zero-extension interactions of the pair form.
fn complement_weights(d: &GridDomain, kt: &KernelTable) -> Vec<f64> {
    let n = d.active_count();
    let mut comp = vec![0.0; n];
    for a in 0..n {
        let node = d.node_of(d.active_box_index(a));
        let mut c = 0.0;
        for b in 0..d.node_count() {
            if d.active_index(b).is_some() {
                continue;
            }
            let other = d.node_of(b);
            c += kt.at(other[0] - node[0], other[1] - node[1]);
        }
        comp[a] = c;
    }
    comp
}

/// Zero-extension fractional pair energy on the active set, in raw integer
/// form: active-active interactions plus each node's coupling to the
/// constrained remainder of the box. `h^{N-sp}` times this is the global
/// Gagliardo power.
pub(crate) struct FractionalPairEnergy {
    nodes: Vec<[i64; 2]>,
    comp: Vec<f64>,
    kt: KernelTable,
    p: f64,
}

impl FractionalPairEnergy {
    pub(crate) fn new(d: &GridDomain, fp: &FracParams) -> Self {
        let kt = KernelTable::new(d, fp);
        let nodes = (0..d.active_count())
            .map(|a| d.node_of(d.active_box_index(a)))
            .collect();
        let comp = complement_weights(d, &kt);
        FractionalPairEnergy { nodes, comp, kt, p: fp.p }
    }

    pub(crate) fn eval(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let n = self.nodes.len();
        let p = self.p;
        let mut total = 0.0;
        match grad {
            None => {
                for a in 0..n {
                    total += 2.0 * self.comp[a] * powp(u[a], p);
                    for b in (a + 1)..n {
                        let k = self.kt.at(
                            self.nodes[b][0] - self.nodes[a][0],
                            self.nodes[b][1] - self.nodes[a][1],
                        );
                        total += 2.0 * k * powp(u[a] - u[b], p);
                    }
                }
            }
            Some(g) => {
                g.fill(0.0);
                for a in 0..n {
                    total += 2.0 * self.comp[a] * powp(u[a], p);
                    g[a] += 2.0 * self.comp[a] * p * powp_prime(u[a], p);
                    for b in (a + 1)..n {
                        let k = self.kt.at(
                            self.nodes[b][0] - self.nodes[a][0],
                            self.nodes[b][1] - self.nodes[a][1],
                        );
                        let diff = u[a] - u[b];
                        total += 2.0 * k * powp(diff, p);
                        let w = 2.0 * k * p * powp_prime(diff, p);
                        g[a] += w;
                        g[b] -= w;
                    }
                }
            }
        }
        total
    }
}

/// Integer fractional form matrix `2 (diag(row sums over the box) - K)` on
/// the active set, whose quadratic form is the raw Gagliardo pair sum.
fn fractional_form_matrix(d: &GridDomain, kt: &KernelTable) -> DMatrix<f64> {
    let n = d.active_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let nodes: Vec<[i64; 2]> = (0..n).map(|a| d.node_of(d.active_box_index(a))).collect();
    let comp = complement_weights(d, kt);
    for a in 0..n {
        let mut rowsum = comp[a];
        for b in 0..n {
            if b == a {
                continue;
            }
            let k = kt.at(nodes[b][0] - nodes[a][0], nodes[b][1] - nodes[a][1]);
            rowsum += k;
            m[(a, b)] = -2.0 * k;
        }
        m[(a, a)] = 2.0 * rowsum;
    }
    m
}

/// Smallest eigenpair of a symmetric positive semidefinite matrix: inverse
/// iteration through a Cholesky factor when the matrix is definite, dense
/// symmetric eigendecomposition otherwise. Either way the returned value is
/// the Rayleigh quotient of the returned vector.
fn smallest_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = m.nrows();
    if let Some(ch) = m.clone().cholesky() {
        let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut rq = (m * &x).dot(&x);
        let mut settled = 0usize;
        let mut healthy = true;
        for _ in 0..800 {
            let mut y = ch.solve(&x);
            let ny = y.norm();
            if !ny.is_finite() || ny == 0.0 {
                healthy = false;
                break;
            }
            y /= ny;
            let rq_new = (m * &y).dot(&y);
            let close = (rq_new - rq).abs() <= 1e-14 * rq_new.abs().max(f64::MIN_POSITIVE);
            x = y;
            rq = rq_new;
            if close {
                settled += 1;
                if settled >= 2 {
                    break;
                }
            } else {
                settled = 0;
            }
        }
        if healthy {
            return (rq, x);
        }
    }
    let se = m.clone().symmetric_eigen();
    let mut idx = 0;
    for i in 1..n {
        if se.eigenvalues[i] < se.eigenvalues[idx] {
            idx = i;
        }
    }
    (se.eigenvalues[idx].max(0.0), se.eigenvectors.column(idx).into_owned())
}

/// Scales `u` to unit raw p-sum; false when `u` is numerically zero.
fn normalize_p(u: &mut [f64], p: f64) -> bool {
    let total: f64 = u.iter().map(|&x| powp(x, p)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return false;
    }
    let scale = total.powf(1.0 / p);
    for x in u.iter_mut() {
        *x /= scale;
    }
    true
}

/// Deterministic restart seeds: the given leading seed followed by fixed-seed
/// random vectors. The random seeds are one-signed because every quotient
/// minimized here has a one-signed minimizer; mixed-sign starts can converge
/// to higher critical points and would poison the restart-spread diagnostic.
fn restart_seeds(lead: &[f64], count: usize) -> Vec<Vec<f64>> {
    let n = lead.len();
    let mut seeds = vec![lead.to_vec()];
    for r in 1..count {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0000 + r as u64);
        seeds.push((0..n).map(|_| rng.gen_range(0.05..1.0)).collect());
    }
    seeds
}

/// Normalized Barzilai-Borwein descent on `energy(u) / sum |u|^p` over the
/// unit raw p-sphere. Returns the best quotient, its minimizer, and the
/// relative spread across the seeds.
fn quotient_descent<F>(energy: F, p: f64, seeds: Vec<Vec<f64>>, max_iters: usize) -> Option<(f64, Vec<f64>, f64)>
where
    F: Fn(&[f64], Option<&mut [f64]>) -> f64,
{
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut finals: Vec<f64> = Vec::new();
    for mut u in seeds {
        if !normalize_p(&mut u, p) {
            continue;
        }
        let n = u.len();
        let mut g = vec![0.0; n];
        let mut g_cand = vec![0.0; n];
        let mut gq = vec![0.0; n];
        let mut e = energy(&u, Some(&mut g));
        let quot_grad = |u: &[f64], g: &[f64], e: f64, gq: &mut [f64]| {
            for i in 0..u.len() {
                gq[i] = g[i] - e * p * powp_prime(u[i], p);
            }
        };
        quot_grad(&u, &g, e, &mut gq);
        let gmax = gq.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let mut alpha = if gmax > 0.0 { 0.1 / gmax } else { 0.0 };
        let mut prev_u = u.clone();
        let mut prev_gq = gq.clone();
        let mut cand = vec![0.0; n];
        let mut stall = 0usize;
        let mut resets = 0usize;
        if alpha > 0.0 {
            for _ in 0..max_iters {
                let gg: f64 = gq.iter().map(|&x| x * x).sum();
                if gg == 0.0 || !gg.is_finite() {
                    break;
                }
                let mut a = alpha.clamp(1e-16, 1e16);
                let mut accepted = false;
                let mut e_cand = f64::INFINITY;
                for _ in 0..64 {
                    for i in 0..n {
                        cand[i] = u[i] - a * gq[i];
                    }
                    if normalize_p(&mut cand, p) {
                        e_cand = energy(&cand, Some(&mut g_cand));
                        if e_cand <= e - 1e-4 * a * gg {
                            accepted = true;
                            break;
                        }
                    }
                    a *= 0.5;
                }
                if !accepted {
                    // A runaway Barzilai-Borwein step can start the
                    // backtracking so high that 64 halvings never reach an
                    // acceptable scale; restart from a gradient-sized step
                    // before giving up on the seed.
                    if resets < 3 {
                        resets += 1;
                        alpha = 0.1 / gg.sqrt();
                        continue;
                    }
                    break;
                }
                prev_u.copy_from_slice(&u);
                prev_gq.copy_from_slice(&gq);
                u.copy_from_slice(&cand);
                std::mem::swap(&mut g, &mut g_cand);
                quot_grad(&u, &g, e_cand, &mut gq);
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..n {
                    let si = u[i] - prev_u[i];
                    ss += si * si;
                    sy += si * (gq[i] - prev_gq[i]);
                }
                alpha = if sy > 0.0 { (ss / sy).clamp(1e-16, 1e16) } else { a * 2.0 };
                let rel = (e - e_cand).abs() / e_cand.abs().max(f64::MIN_POSITIVE);
                e = e_cand;
                if rel <= 1e-13 {
                    stall += 1;
                    if stall >= 6 {
                        break;
                    }
                } else {
                    stall = 0;
                }
            }
        }
        finals.push(e);
        if best.as_ref().map_or(true, |(be, _)| e < *be) {
            best = Some((e, u.clone()));
        }
    }
    let (bq, bu) = best?;
    let worst = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (worst - bq) / bq.abs().max(f64::MIN_POSITIVE);
    Some((bq, bu, spread))
}

/// Flips the sign so the largest entry is positive and scales to unit L^p
/// norm; purely cosmetic since every quotient is scale invariant.
fn canonical_minimizer(d: &Arc<GridDomain>, mut vals: Vec<f64>, p: f64) -> Result<GridFunction> {
    let mut imax = 0;
    for i in 1..vals.len() {
        if vals[i].abs() > vals[imax].abs() {
            imax = i;
        }
    }
    if !vals.is_empty() && vals[imax] < 0.0 {
        for v in vals.iter_mut() {
            *v = -*v;
        }
    }
    let gf = GridFunction::new(d.clone(), vals)?;
    let nrm = lp_norm(&gf, p);
    if !(nrm > 0.0) {
        return Err(Error::Param("Rayleigh minimizer collapsed to zero".into()));
    }
    let scaled = gf.values().iter().map(|v| v / nrm).collect();
    GridFunction::new(d.clone(), scaled)
}

/// Sharp constant of the gradient Poincaré inequality with zero extension:
/// the minimum of `grad_seminorm^p / lp_norm^p` over nonzero grid functions.
pub fn lambda1(d: &Arc<GridDomain>, p: f64) -> Result<RayleighResult> {
    check_p(p)?;
    check_active(d)?;
    check_dense_size(d)?;
    let l = dirichlet_graph_laplacian(d);
    let (raw_quot, vec) = smallest_eigenpair(&l);
    let p2_minimizer = vec.data.as_vec().clone();
    if p == 2.0 {
        let minimizer = canonical_minimizer(d, p2_minimizer, p)?;
        let value = grad_seminorm_pow(&minimizer, p) / lp_norm_pow(&minimizer, p);
        let internal = raw_quot / (d.h() * d.h());
        let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
        return Ok(RayleighResult { value, minimizer, spread: 0.0, certificate_gap: gap });
    }
    let stencil = GradStencil::new(d);
    let energy = |u: &[f64], grad: Option<&mut [f64]>| -> f64 {
        if let Some(g) = grad {
            g.fill(0.0);
            stencil.energy(u, p, Some(g))
        } else {
            stencil.energy(u, p, None)
        }
    };
    let seeds = restart_seeds(&p2_minimizer, EIG_RESTARTS);
    let (raw, vals, spread) =
        quotient_descent(energy, p, seeds, 4000).ok_or(Error::EmptyTarget)?;
    let minimizer = canonical_minimizer(d, vals, p)?;
    let value = grad_seminorm_pow(&minimizer, p) / lp_norm_pow(&minimizer, p);
    let internal = raw * d.h().powf(-p);
    let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
    Ok(RayleighResult { value, minimizer, spread, certificate_gap: gap })
}

/// Sharp constant of the fractional Poincaré inequality with zero extension:
/// the minimum of `gagliardo_global^p / lp_norm^p`.
pub fn lambda_s(d: &Arc<GridDomain>, fp: &FracParams) -> Result<RayleighResult> {
    check_active(d)?;
    check_dense_size(d)?;
    let p = fp.p;
    let kt = KernelTable::new(d, fp);
    let m = fractional_form_matrix(d, &kt);
    let (raw_quot, vec) = smallest_eigenpair(&m);
    let p2_minimizer = vec.data.as_vec().clone();
    if p == 2.0 {
        let minimizer = canonical_minimizer(d, p2_minimizer, p)?;
        let value = gagliardo_global_pow(&minimizer, fp) / lp_norm_pow(&minimizer, p);
        let internal = raw_quot * d.h().powf(-fp.sp());
        let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
        return Ok(RayleighResult { value, minimizer, spread: 0.0, certificate_gap: gap });
    }
    let pe = FractionalPairEnergy::new(d, fp);
    let energy = |u: &[f64], grad: Option<&mut [f64]>| pe.eval(u, grad);
    let seeds = restart_seeds(&p2_minimizer, EIG_RESTARTS);
    let (raw, vals, spread) =
        quotient_descent(energy, p, seeds, 4000).ok_or(Error::EmptyTarget)?;
    let minimizer = canonical_minimizer(d, vals, p)?;
    let value = gagliardo_global_pow(&minimizer, fp) / lp_norm_pow(&minimizer, p);
    let internal = raw * d.h().powf(-fp.sp());
    let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
    Ok(RayleighResult { value, minimizer, spread, certificate_gap: gap })
}

/// Mixed constant of a cracked cell: natural (no-flux) behaviour on the box
/// walls, zero only on the crack. The cell must be built so that its
/// constrained nodes are exactly the crack, e.g. with
/// [`GridDomain::make_free_box_with_cracks`].
pub fn mu_mixed(cell: &Arc<GridDomain>, p: f64) -> Result<RayleighResult> {
    check_p(p)?;
    check_active(cell)?;
    check_dense_size(cell)?;
    if cell.node_count() == cell.active_count() {
        return Err(Error::Config(
            "the mixed quotient needs a nonempty crack; without one its minimum is 0 at constants"
                .into(),
        ));
    }
    let l = natural_graph_laplacian(cell);
    let (raw_quot, vec) = smallest_eigenpair(&l);
    let p2_minimizer = vec.data.as_vec().clone();
    if p == 2.0 {
        let minimizer = canonical_minimizer(cell, p2_minimizer, p)?;
        let value = grad_seminorm_box_pow(&minimizer, p) / lp_norm_pow(&minimizer, p);
        let internal = raw_quot / (cell.h() * cell.h());
        let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
        return Ok(RayleighResult { value, minimizer, spread: 0.0, certificate_gap: gap });
    }
    let stencil = GradStencil::new_interior(cell);
    let energy = |u: &[f64], grad: Option<&mut [f64]>| -> f64 {
        if let Some(g) = grad {
            g.fill(0.0);
            stencil.energy(u, p, Some(g))
        } else {
            stencil.energy(u, p, None)
        }
    };
    let seeds = restart_seeds(&p2_minimizer, EIG_RESTARTS);
    let (raw, vals, spread) =
        quotient_descent(energy, p, seeds, 4000).ok_or(Error::EmptyTarget)?;
    let minimizer = canonical_minimizer(cell, vals, p)?;
    let value = grad_seminorm_box_pow(&minimizer, p) / lp_norm_pow(&minimizer, p);
    let internal = raw * cell.h().powf(-p);
    let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
    Ok(RayleighResult { value, minimizer, spread, certificate_gap: gap })
}

/// Golden-section over `ln mu` of the quadratic-couple objective
/// `a(mu) + t b(mu)` in eigencoordinates, returning the interior minimum and
/// its `(mu, a, b)`.
fn golden_quadratic(eigs: &[f64], w: &[f64], hn: f64, h2: f64, t: f64) -> (f64, f64, f64, f64) {
    let e_min = eigs.iter().cloned().find(|&e| e > 0.0).unwrap_or(1.0);
    let e_max = eigs.last().cloned().unwrap_or(1.0).max(e_min);
    let parts = |mu: f64| -> (f64, f64) {
        let mut a2 = 0.0;
        let mut b2 = 0.0;
        for (k, &e) in eigs.iter().enumerate() {
            let denom = 1.0 + mu * e;
            let r = mu * e / denom;
            a2 += (w[k] * r) * (w[k] * r);
            b2 += e * (w[k] / denom) * (w[k] / denom);
        }
        ((hn * a2).sqrt(), ((hn / h2) * b2).sqrt())
    };
    let g = |ln_mu: f64| -> f64 {
        let (a, b) = parts(ln_mu.exp());
        a + t * b
    };
    let mut lo = (1e-10 / e_max).ln();
    let mut hi = (1e10 / e_min).ln();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..110 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = g(x2);
        }
    }
    let x_star = if f1 <= f2 { x1 } else { x2 };
    let mu = x_star.exp();
    let (a, b) = parts(mu);
    (a + t * b, mu, a, b)
}

/// Fixed-window interpolation-norm power objective in eigencoordinates for
/// the quadratic couple, with analytic gradients. Values are divided by
/// `h^N` so the quotient against the raw square sum is the true X-quotient.
struct WQuadObjective {
    eigs: Vec<f64>,
    hn: f64,
    h2: f64,
    s: f64,
    ts: Vec<f64>,
    wts: Vec<f64>,
    head_c: f64,
    tail_c: f64,
}

impl WQuadObjective {
    fn new(eigs: Vec<f64>, hn: f64, h2: f64, s: f64, t_min: f64, t_max: f64) -> Self {
        let per_decade = 24.0;
        let decades = (t_max / t_min).log10();
        let n = ((decades * per_decade).ceil() as usize).max(8);
        let step = (t_max / t_min).ln() / n as f64;
        let ts: Vec<f64> = (0..=n).map(|i| t_min * (step * i as f64).exp()).collect();
        let wts: Vec<f64> = (0..=n)
            .map(|i| if i == 0 || i == n { 0.5 * step } else { step })
            .collect();
        let head_c = t_min.powf(2.0 * (1.0 - s)) / (2.0 * (1.0 - s));
        let tail_c = t_max.powf(-2.0 * s) / (2.0 * s);
        WQuadObjective { eigs, hn, h2, s, ts, wts, head_c, tail_c }
    }

    /// `X_pow(w) / h^N` and optionally its gradient.
    fn eval(&self, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let n = w.len();
        let hn = self.hn;
        let hr = hn / self.h2;
        let u2: f64 = hn * w.iter().map(|&x| x * x).sum::<f64>();
        let b2: f64 = hr * self.eigs.iter().zip(w).map(|(&e, &x)| e * x * x).sum::<f64>();
        let nu = u2.sqrt();
        let ng = b2.sqrt();
        let mut gx: Option<&mut [f64]> = grad;
        if let Some(g) = gx.as_deref_mut() {
            g.fill(0.0);
        }
        let mut x_pow = 0.0;
        for (i, &t) in self.ts.iter().enumerate() {
            let (k_int, mu, a, b) = golden_quadratic(&self.eigs, w, hn, self.h2, t);
            let weight = self.wts[i] * t.powf(-2.0 * self.s);
            let k = k_int.min(nu).min(t * ng);
            x_pow += weight * k * k;
            if let Some(g) = gx.as_deref_mut() {
                let f = weight * 2.0 * k;
                if nu <= k_int && nu <= t * ng {
                    for j in 0..n {
                        g[j] += f * hn * w[j] / nu;
                    }
                } else if t * ng < k_int {
                    for j in 0..n {
                        g[j] += f * t * hr * self.eigs[j] * w[j] / ng;
                    }
                } else {
                    for j in 0..n {
                        let denom = 1.0 + mu * self.eigs[j];
                        let r = mu * self.eigs[j] / denom;
                        let da = if a > 0.0 { hn * w[j] * r * r / a } else { 0.0 };
                        let db = if b > 0.0 {
                            hr * self.eigs[j] * w[j] / (denom * denom) / b
                        } else {
                            0.0
                        };
                        g[j] += f * (da + t * db);
                    }
                }
            }
        }
        x_pow += 0.5 * self.head_c * b2 + 0.5 * self.tail_c * u2;
        if let Some(g) = gx.as_deref_mut() {
            for j in 0..n {
                g[j] += 0.5 * self.head_c * hr * 2.0 * self.eigs[j] * w[j]
                    + 0.5 * self.tail_c * hn * 2.0 * w[j];
                g[j] /= hn;
            }
        }
        x_pow / hn
    }
}

/// Interpolation-norm power objective `X_pow(u) / h^N` on active-node values,
/// for the quadratic couple: each evaluation rotates into eigencoordinates,
/// prices the fixed-window quadrature there, and rotates the gradient back.
pub(crate) struct XPowQuad<'a> {
    spectral: &'a Spectral,
    wq: WQuadObjective,
}

impl<'a> XPowQuad<'a> {
    pub(crate) fn new(
        spectral: &'a Spectral,
        hn: f64,
        h2: f64,
        s: f64,
        t_min: f64,
        t_max: f64,
    ) -> Self {
        let wq = WQuadObjective::new(spectral.eigs.clone(), hn, h2, s, t_min, t_max);
        XPowQuad { spectral, wq }
    }

    pub(crate) fn eval(&self, uv: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let w = self.spectral.q.transpose() * DVector::from_column_slice(uv);
        match grad {
            None => self.wq.eval(w.as_slice(), None),
            Some(g) => {
                let mut gw = vec![0.0; uv.len()];
                let x = self.wq.eval(w.as_slice(), Some(&mut gw));
                let gu = &self.spectral.q * DVector::from_column_slice(&gw);
                g.copy_from_slice(gu.as_slice());
                x
            }
        }
    }
}

/// Interpolation-norm power objective `X_pow(u) / h^N` for general `p`: each
/// evaluation rebuilds the scalarization frontier of the current iterate and
/// prices the fixed-window quadrature on its envelope, with the envelope
/// minimizers held fixed for the gradient.
pub(crate) struct XPowGeneral<'a> {
    solver: &'a KSolver,
    d: Arc<GridDomain>,
    stencil: GradStencil,
    ts: Vec<f64>,
    wts: Vec<f64>,
    head_c: f64,
    tail_c: f64,
    hb: f64,
    hn: f64,
    s: f64,
    p: f64,
    t_min: f64,
    t_max: f64,
}

impl<'a> XPowGeneral<'a> {
    pub(crate) fn new(solver: &'a KSolver, fp: &FracParams, t_min: f64, t_max: f64) -> Self {
        let d = solver.domain().clone();
        let (s, p) = (fp.s, fp.p);
        let per_decade = 24.0;
        let decades = (t_max / t_min).log10();
        let nq = ((decades * per_decade).ceil() as usize).max(8);
        let step = (t_max / t_min).ln() / nq as f64;
        let ts: Vec<f64> = (0..=nq).map(|i| t_min * (step * i as f64).exp()).collect();
        let wts: Vec<f64> = (0..=nq)
            .map(|i| if i == 0 || i == nq { 0.5 * step } else { step })
            .collect();
        let head_c = t_min.powf(p * (1.0 - s)) / (p * (1.0 - s));
        let tail_c = t_max.powf(-s * p) / (s * p);
        let hb = d.h().powf(d.dim() as f64 - p);
        let hn = d.h().powi(d.dim() as i32);
        let stencil = GradStencil::new(&d);
        XPowGeneral { solver, d, stencil, ts, wts, head_c, tail_c, hb, hn, s, p, t_min, t_max }
    }

    pub(crate) fn eval(&self, uv: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (p, hn, hb) = (self.p, self.hn, self.hb);
        let uf = match GridFunction::new(self.d.clone(), uv.to_vec()) {
            Ok(f) => f,
            Err(_) => return f64::INFINITY,
        };
        let norm_u = lp_norm(&uf, p);
        let mut gb = vec![0.0; uv.len()];
        let bp_raw = self.stencil.energy(uv, p, Some(&mut gb));
        let norm_grad = (hb * bp_raw).powf(1.0 / p);
        let fr = match self.solver.frontier(&uf, self.t_min, self.t_max) {
            Ok(f) => f,
            Err(_) => return f64::INFINITY,
        };
        let mut x_pow = 0.0;
        let mut gx = grad;
        if let Some(g) = gx.as_deref_mut() {
            g.fill(0.0);
        }
        for (i, &t) in self.ts.iter().enumerate() {
            let (k, case) = fr.envelope_argmin(t, norm_u, norm_grad);
            let weight = self.wts[i] * t.powf(-self.s * p);
            x_pow += weight * powp(k, p);
            if let Some(g) = gx.as_deref_mut() {
                let f = weight * p * powp(k, p - 1.0);
                match case {
                    EnvelopeCase::Point(j) => {
                        let a = fr.point_a(j);
                        let v = fr.point_v(j);
                        if a > 0.0 {
                            let scale = f * a.powf(1.0 - p) * hn;
                            for i in 0..uv.len() {
                                g[i] += scale * powp_prime(uv[i] - v[i], p);
                            }
                        }
                    }
                    EnvelopeCase::EndpointU => {
                        let scale = f * norm_u.powf(1.0 - p) * hn;
                        for i in 0..uv.len() {
                            g[i] += scale * powp_prime(uv[i], p);
                        }
                    }
                    EnvelopeCase::EndpointGrad => {
                        if norm_grad > 0.0 {
                            let scale = f * t * norm_grad.powf(1.0 - p) * hb / p;
                            for i in 0..uv.len() {
                                g[i] += scale * gb[i];
                            }
                        }
                    }
                }
            }
        }
        x_pow += 0.5 * self.head_c * hb * bp_raw + 0.5 * self.tail_c * powp(norm_u, p);
        if let Some(g) = gx.as_deref_mut() {
            for i in 0..uv.len() {
                g[i] += 0.5 * self.head_c * hb * gb[i]
                    + 0.5 * self.tail_c * hn * p * powp_prime(uv[i], p);
                g[i] /= hn;
            }
        }
        x_pow / hn
    }
}

/// Picks the fixed quadrature window for an interpolation-norm objective: the
/// union of the seeds' automatically certified windows, widened so the window
/// stays valid while the minimizer moves.
pub(crate) fn interp_window(
    solver: &KSolver,
    seeds: &[GridFunction],
    fp: &FracParams,
) -> Result<(f64, f64)> {
    let mut t_min = f64::INFINITY;
    let mut t_max = 0.0f64;
    for u in seeds {
        let xn = x_norm_auto_with(solver, u, fp)?;
        t_min = t_min.min(xn.t_min);
        t_max = t_max.max(xn.t_max);
    }
    Ok((t_min / 4.0, t_max * 4.0))
}

/// Upper bound for the interpolation-norm Poincaré quotient
/// `x_norm(u)^p / lp_norm(u)^p`, by normalized descent seeded with the
/// `lambda1` and `lambda_s` minimizers. The reported value is the quotient of
/// the returned minimizer at the standard quadrature resolution.
pub fn lambda_interp_upper(d: &Arc<GridDomain>, fp: &FracParams) -> Result<RayleighResult> {
    let p = fp.p;
    let l1 = lambda1(d, p)?;
    let ls = lambda_s(d, fp)?;
    if !(l1.value > 0.0) {
        return Err(Error::Param(
            "the interpolation quotient needs a Poincaré domain (lambda1 > 0)".into(),
        ));
    }
    let solver = KSolver::new(d.clone(), p)?;
    let seeds_u = [l1.minimizer, ls.minimizer];
    let (t_min, t_max) = interp_window(&solver, &seeds_u, fp)?;
    let seeds: Vec<Vec<f64>> = seeds_u.iter().map(|u| u.values().to_vec()).collect();
    let (internal, vals, spread) = if p == 2.0 {
        let sp_data = solver.spectral().expect("p = 2 solver carries spectral data");
        let hn = d.h().powi(d.dim() as i32);
        let objective = XPowQuad::new(sp_data, hn, d.h() * d.h(), fp.s, t_min, t_max);
        let energy = |uv: &[f64], grad: Option<&mut [f64]>| objective.eval(uv, grad);
        quotient_descent(energy, 2.0, seeds, 200).ok_or(Error::EmptyTarget)?
    } else {
        if d.active_count() > INTERP_MAX_GENERAL {
            return Err(Error::TooLarge { size: d.active_count(), limit: INTERP_MAX_GENERAL });
        }
        let objective = XPowGeneral::new(&solver, fp, t_min, t_max);
        let energy = |uv: &[f64], grad: Option<&mut [f64]>| objective.eval(uv, grad);
        quotient_descent(energy, p, seeds, 200).ok_or(Error::EmptyTarget)?
    };
    let minimizer = canonical_minimizer(d, vals, p)?;
    let xn = x_norm_auto_with(&solver, &minimizer, fp)?;
    let value = powp(xn.value, p) / lp_norm_pow(&minimizer, p);
    let gap = (internal - value).abs() / value.abs().max(f64::MIN_POSITIVE);
    Ok(RayleighResult { value, minimizer, spread, certificate_gap: gap })
}

/// Computes both Poincaré constants, the interpolation upper bound, and the
/// residuals of the constant-comparison inequalities.
pub fn doubleside_check(d: &Arc<GridDomain>, fp: &FracParams) -> Result<ConstantReport> {
    let s = fp.s;
    let p = fp.p;
    let l1 = lambda1(d, p)?;
    let ls = lambda_s(d, fp)?;
    let li = lambda_interp_upper(d, fp)?;
    let mc = MathConstants::new(d.dim(), p)?;
    let lhs = s * (1.0 - s) * ls.value;
    let rhs = 2f64.powf(p * (1.0 - s)) * d.dim() as f64 * mc.omega_n * l1.value.powf(s);
    Ok(ConstantReport {
        s,
        p,
        lambda1: l1.value,
        lambda_s: ls.value,
        lambda_interp_upper: li.value,
        residual_equivalence: s * (1.0 - s) * li.value - l1.value.powf(s),
        residual_oneside: rhs - lhs,
        residual_twosideconv: l1.value.powf(s) / (s * (1.0 - s) * ls.value),
        minimizer_lambda1: l1.minimizer,
        minimizer_lambda_s: ls.minimizer,
    })
}

/// Sweeps the cracked-cube family: for each `n`, both Poincaré constants of
/// the cracked domain, the mixed constant of the unit cell, and the ratio
/// `lambda1^s / lambda_s` that separates as the family grows.
pub fn counterexample_sweep(
    dim: usize,
    ns: &[i64],
    h: f64,
    fp: &FracParams,
) -> Result<Vec<CounterexampleRow>> {
    if fp.sp() >= 1.0 {
        return Err(Error::Param(format!(
            "the cracked family separates only in the regime s*p < 1, got s*p = {}; \
             for s*p >= 1 points and cracks carry capacity and the effect disappears",
            fp.sp()
        )));
    }
    if ns.is_empty() {
        return Err(Error::Param("need at least one family index n".into()));
    }
    let half = if dim == 2 { 0.25 } else { 0.0 };
    let cell = GridDomain::make_free_box_with_cracks(
        dim,
        &vec![[-0.5, 0.5]; dim],
        &[crate::domain::Crack { center: vec![0.0; dim], half_extent: half }],
        h,
    )?;
    let mu = mu_mixed(&cell, fp.p)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let dom = GridDomain::make_cracked_domain(dim, n, h)?;
        let l1 = lambda1(&dom, fp.p)?;
        let ls = lambda_s(&dom, fp)?;
        rows.push(CounterexampleRow {
            n,
            lambda1: l1.value,
            lambda_s: ls.value,
            mu_cell: mu.value,
            ratio: l1.value.powf(fp.s) / ls.value,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Crack;
    use crate::params::TOL_EIG;

    fn unit_interval(h: f64) -> Arc<GridDomain> {
        GridDomain::make_box(1, 1.0, h).unwrap()
    }

    #[test]
    fn one_node_gradient_constant_is_stiffness_value() {
        // One active node at 1/2 with h = 1/2: two unit jumps, so the raw
        // quotient is 2 and lambda1 = 2 / h^2 = 8. For p = 3 the same two
        // jumps give 2 / h^3 = 16.
        let d = unit_interval(0.5);
        let r2 = lambda1(&d, 2.0).unwrap();
        assert!((r2.value - 8.0).abs() < 1e-12, "{}", r2.value);
        assert!(r2.certificate_gap < 1e-12);
        let r3 = lambda1(&d, 3.0).unwrap();
        assert!((r3.value - 16.0).abs() < 1e-9, "{}", r3.value);
        assert!(r3.spread < TOL_EIG);
    }

    #[test]
    fn interval_lambda1_matches_dense_oracle_and_closed_form() {
        // Independent oracle: assemble the path-graph Laplacian from scratch
        // and take the smallest dense eigenvalue; the closed form is
        // 4 sin^2(pi h / 2) / h^2, which tends to pi^2.
        let mut prev_gap = f64::INFINITY;
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let d = unit_interval(h);
            let got = lambda1(&d, 2.0).unwrap();
            let n = d.active_count();
            let mut l = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                l[(i, i)] = 2.0;
                if i + 1 < n {
                    l[(i, i + 1)] = -1.0;
                    l[(i + 1, i)] = -1.0;
                }
            }
            let se = l.symmetric_eigen();
            let dense = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min) / (h * h);
            let closed = 4.0 * (std::f64::consts::PI * h / 2.0).sin().powi(2) / (h * h);
            assert!((got.value - dense).abs() <= 1e-10 * dense, "dense h={h}");
            assert!((got.value - closed).abs() <= 1e-10 * closed, "closed h={h}");
            let gap = (got.value - std::f64::consts::PI.powi(2)).abs();
            assert!(gap < prev_gap, "should approach pi^2 as h shrinks");
            prev_gap = gap;
            let again = lambda1(&d, 2.0).unwrap();
            assert_eq!(got.value.to_bits(), again.value.to_bits(), "deterministic");
        }
    }

    #[test]
    fn lambda1_scaling_exact_under_dilation() {
        let d = unit_interval(1.0 / 8.0);
        for p in [1.5, 2.0] {
            let base = lambda1(&d, p).unwrap().value;
            let big = lambda1(&d.dilate(3.0).unwrap(), p).unwrap().value;
            let want = 3f64.powf(-p) * base;
            assert!(
                (big - want).abs() <= 1e-13 * want,
                "p={p}: {big} vs {want}"
            );
        }
    }

    #[test]
    fn lambda1_descent_matches_grid_search() {
        // Three active nodes, p = 3: a nested grid search over the raw
        // quotient is an independent oracle for the descent path.
        let d = unit_interval(0.25);
        let p = 3.0;
        let got = lambda1(&d, p).unwrap();
        let stencil = GradStencil::new(&d);
        let quot = |u: &[f64]| -> f64 {
            let den: f64 = u.iter().map(|&x| powp(x, p)).sum();
            stencil.energy(u, p, None) / den
        };
        let mut center = [0.0f64; 3];
        let mut radius = 1.0;
        let mut best = f64::INFINITY;
        for _ in 0..14 {
            let mut arg = center;
            for i in -4i32..=4 {
                for j in -4i32..=4 {
                    for k in -4i32..=4 {
                        let u = [
                            center[0] + radius * i as f64 / 4.0,
                            center[1] + radius * j as f64 / 4.0,
                            center[2] + radius * k as f64 / 4.0,
                        ];
                        let den: f64 = u.iter().map(|&x| powp(x, p)).sum();
                        if den < 1e-12 {
                            continue;
                        }
                        let q = quot(&u);
                        if q < best {
                            best = q;
                            arg = u;
                        }
                    }
                }
            }
            center = arg;
            radius /= 3.0;
        }
        let oracle = best * d.h().powf(-p);
        assert!(
            (got.value - oracle).abs() <= 2e-3 * oracle,
            "descent {} vs grid {}",
            got.value,
            oracle
        );
        assert!(got.value <= oracle * (1.0 + 1e-9), "descent should not be worse");
        assert!(got.spread <= TOL_EIG, "restart spread {}", got.spread);
        assert!(got.certificate_gap <= 1e-12);
    }

    #[test]
    fn lambda1_strictly_increases_when_crack_added() {
        // Constraining a node where the eigenfunction is nonzero shrinks the
        // admissible set in a way the minimizer feels.
        let h = 1.0 / 16.0;
        let plain = lambda1(&unit_interval(h), 2.0).unwrap().value;
        let cracked = GridDomain::make_box_with_cracks(
            1,
            &[[0.0, 1.0]],
            &[Crack { center: vec![0.5], half_extent: 0.0 }],
            h,
        )
        .unwrap();
        let constrained = lambda1(&cracked, 2.0).unwrap().value;
        assert!(constrained > plain * 1.5, "{constrained} vs {plain}");
    }

    #[test]
    fn lambda_s_single_node_is_kernel_row_sum() {
        // One active node: the quotient is constant, twice the kernel row sum
        // over the box, scaled by h^{-sp}.
        let d = unit_interval(0.5);
        for (s, p) in [(0.4, 2.0), (0.4, 1.5)] {
            let fp = FracParams::new(s, p).unwrap();
            let got = lambda_s(&d, &fp).unwrap();
            let mut row = 0.0;
            for j in [-1i64, 1] {
                row += (j.abs() as f64).powf(-(1.0 + s * p));
            }
            let want = d.h().powf(-s * p) * 2.0 * row;
            assert!(
                (got.value - want).abs() <= 1e-13 * want,
                "s={s} p={p}: {} vs {want}",
                got.value
            );
        }
    }

    #[test]
    fn lambda_s_matches_dense_oracle_small() {
        // Independent oracle: assemble the pair form literally over all box
        // node pairs and take the smallest dense eigenvalue.
        let h = 1.0 / 16.0;
        let d = unit_interval(h);
        let fp = FracParams::new(0.5, 2.0).unwrap();
        let got = lambda_s(&d, &fp).unwrap();
        let n = d.active_count();
        let nodes: Vec<i64> = (0..d.node_count()).map(|b| d.node_of(b)[0]).collect();
        let active: Vec<usize> = (0..d.node_count())
            .filter(|&b| d.active_index(b).is_some())
            .collect();
        let kern = |i: i64, j: i64| ((i - j).abs() as f64).powf(-(1.0 + fp.sp()));
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (ai, &bi) in active.iter().enumerate() {
            let mut row = 0.0;
            for bj in 0..d.node_count() {
                if bj == bi {
                    continue;
                }
                row += kern(nodes[bi], nodes[bj]);
            }
            m[(ai, ai)] = 2.0 * row;
            for (aj, &bj) in active.iter().enumerate() {
                if aj != ai {
                    m[(ai, aj)] = -2.0 * kern(nodes[bi], nodes[bj]);
                }
            }
        }
        let se = m.symmetric_eigen();
        let dense =
            se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min) * h.powf(-fp.sp());
        assert!(
            (got.value - dense).abs() <= 1e-10 * dense,
            "{} vs {dense}",
            got.value
        );
        assert!(got.certificate_gap <= 1e-12);
    }

    #[test]
    fn lambda_s_scaling_exact_under_dilation() {
        let d = unit_interval(1.0 / 8.0);
        for (s, p) in [(0.3, 2.0), (0.3, 1.5)] {
            let fp = FracParams::new(s, p).unwrap();
            let base = lambda_s(&d, &fp).unwrap().value;
            let big = lambda_s(&d.dilate(3.0).unwrap(), &fp).unwrap().value;
            let want = 3f64.powf(-s * p) * base;
            assert!(
                (big - want).abs() <= 1e-12 * want,
                "s={s} p={p}: {big} vs {want}"
            );
        }
    }

    #[test]
    fn lambda_s_monotone_when_nodes_constrained() {
        let h = 1.0 / 8.0;
        let fp = FracParams::new(0.4, 2.0).unwrap();
        let plain = lambda_s(&unit_interval(h), &fp).unwrap().value;
        let cracked = GridDomain::make_box_with_cracks(
            1,
            &[[0.0, 1.0]],
            &[Crack { center: vec![0.5], half_extent: 0.0 }],
            h,
        )
        .unwrap();
        let constrained = lambda_s(&cracked, &fp).unwrap().value;
        assert!(constrained >= plain * (1.0 - 1e-12), "{constrained} vs {plain}");
    }

    #[test]
    fn mixed_cell_hand_value() {
        // Box [0,1], h = 1/2, crack at the midpoint: the two wall nodes are
        // free, both box edges jump onto the crack, and the raw quotient is 1,
        // so mu = h^{-p}.
        let cell = GridDomain::make_free_box_with_cracks(
            1,
            &[[0.0, 1.0]],
            &[Crack { center: vec![0.5], half_extent: 0.0 }],
            0.5,
        )
        .unwrap();
        let r2 = mu_mixed(&cell, 2.0).unwrap();
        assert!((r2.value - 4.0).abs() <= 1e-12, "{}", r2.value);
        let r3 = mu_mixed(&cell, 3.0).unwrap();
        assert!((r3.value - 8.0).abs() <= 1e-9, "{}", r3.value);
    }

    #[test]
    fn mixed_cell_matches_dense_oracle_2d() {
        // Independent oracle: natural-wall Laplacian over the cell assembled
        // from scratch, crack rows and columns removed.
        let h = 0.25;
        let cell = GridDomain::make_free_box_with_cracks(
            2,
            &[[-0.5, 0.5], [-0.5, 0.5]],
            &[Crack { center: vec![0.0, 0.0], half_extent: 0.25 }],
            h,
        )
        .unwrap();
        let got = mu_mixed(&cell, 2.0).unwrap();
        assert!(got.value > 0.0);
        let n = cell.active_count();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            let node = cell.node_of(cell.active_box_index(a));
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let nb = [node[0] + dx, node[1] + dy];
                if let Some(bj) = cell.box_index(nb) {
                    l[(a, a)] += 1.0;
                    if let Some(aj) = cell.active_index(bj) {
                        l[(a, aj)] -= 1.0;
                    }
                }
            }
        }
        let se = l.symmetric_eigen();
        let dense = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min) / (h * h);
        assert!(
            (got.value - dense).abs() <= 1e-10 * dense,
            "{} vs {dense}",
            got.value
        );
    }

    #[test]
    fn mixed_cell_with_full_boundary_crack_equals_dirichlet_constant() {
        // When the crack is the whole wall the natural form over box edges
        // coincides with the zero-extension form: the extra exterior edges of
        // the latter all have zero difference.
        let h = 0.25;
        let cell = GridDomain::make_free_box_with_cracks(
            1,
            &[[0.0, 1.0]],
            &[
                Crack { center: vec![0.0], half_extent: 0.0 },
                Crack { center: vec![1.0], half_extent: 0.0 },
            ],
            h,
        )
        .unwrap();
        for p in [1.5, 2.0] {
            let mu = mu_mixed(&cell, p).unwrap().value;
            let l1 = lambda1(&unit_interval(h), p).unwrap().value;
            assert!((mu - l1).abs() <= 1e-11 * l1, "p={p}: {mu} vs {l1}");
        }
    }

    #[test]
    fn mixed_quotient_rejects_empty_crack() {
        let free = GridDomain::make_box_free(1, &[[0.0, 1.0]], 0.25).unwrap();
        assert!(mu_mixed(&free, 2.0).is_err());
    }

    #[test]
    fn cracked_family_gradient_constant_dominates_cell_constant() {
        // The edge-partition argument makes lambda1 of the cracked family at
        // least the mixed cell constant, exactly, already at the grid level.
        let h = 1.0 / 8.0;
        let cell = GridDomain::make_free_box_with_cracks(
            1,
            &[[-0.5, 0.5]],
            &[Crack { center: vec![0.0], half_extent: 0.0 }],
            h,
        )
        .unwrap();
        for p in [2.0, 1.5] {
            let mu = mu_mixed(&cell, p).unwrap().value;
            for n in [0i64, 1] {
                let dom = GridDomain::make_cracked_domain(1, n, h).unwrap();
                let l1 = lambda1(&dom, p).unwrap().value;
                assert!(
                    l1 >= mu * (1.0 - 1e-12),
                    "p={p} n={n}: lambda1 {l1} vs mu {mu}"
                );
            }
        }
    }

    #[test]
    fn interp_upper_measures_corrected_identity() {
        // On the unit interval at p = 2 the interpolation quotient of the
        // principal eigenfunction evaluates in closed form to
        // lambda1^s / (p s(1-s)); the descent value documents that the
        // p-corrected combination lands at lambda1^s while the uncorrected
        // one sits near 1/p of it.
        let d = unit_interval(1.0 / 32.0);
        let l1 = lambda1(&d, 2.0).unwrap().value;
        for s in [0.3, 0.7] {
            let fp = FracParams::new(s, 2.0).unwrap();
            let li = lambda_interp_upper(&d, &fp).unwrap();
            let corrected = 2.0 * s * (1.0 - s) * li.value / l1.powf(s);
            let as_printed = corrected / 2.0;
            assert!(
                (0.9..=1.1).contains(&corrected),
                "s={s}: corrected ratio {corrected}"
            );
            assert!(
                (0.45..=0.55).contains(&as_printed),
                "s={s}: uncorrected ratio {as_printed}"
            );
            assert!(li.spread <= 1e-6, "seed spread {}", li.spread);
            // Certificate: the reported value is the recomputed quotient of
            // the reported minimizer.
            let solver = KSolver::new(d.clone(), 2.0).unwrap();
            let xn = x_norm_auto_with(&solver, &li.minimizer, &fp).unwrap();
            let recomputed = powp(xn.value, 2.0) / lp_norm_pow(&li.minimizer, 2.0);
            assert!((recomputed - li.value).abs() <= 1e-12 * li.value);
        }
    }

    #[test]
    fn interp_upper_general_p_sits_under_comparison_chain() {
        // lambda_s <= 2^{p(1-s)} N omega_N * interp quotient pointwise in u,
        // hence also for the infima; 5% covers the quadrature slack.
        let d = unit_interval(1.0 / 16.0);
        let fp = FracParams::new(0.5, 1.5).unwrap();
        let li = lambda_interp_upper(&d, &fp).unwrap();
        assert!(li.value.is_finite() && li.value > 0.0);
        assert!(li.spread <= 1e-3, "seed spread {}", li.spread);
        let ls = lambda_s(&d, &fp).unwrap().value;
        let c = 2f64.powf(fp.p * (1.0 - fp.s)) * 2.0;
        assert!(
            ls <= c * li.value * 1.05,
            "chain: lambda_s {ls} vs bound {}",
            c * li.value
        );
    }

    #[test]
    fn doubleside_report_is_internally_consistent() {
        let d = unit_interval(1.0 / 16.0);
        let fp = FracParams::new(0.5, 2.0).unwrap();
        let rep = doubleside_check(&d, &fp).unwrap();
        assert!(rep.lambda1 > 0.0 && rep.lambda_s > 0.0 && rep.lambda_interp_upper > 0.0);
        let lhs = 0.25 * rep.lambda_s;
        let rhs = 2.0 * 2.0 * rep.lambda1.powf(0.5);
        assert!((rep.residual_oneside - (rhs - lhs)).abs() <= 1e-12 * rhs.abs());
        assert!(rep.residual_oneside >= 0.0, "oneside holds on the interval");
        assert!(
            (rep.residual_twosideconv - rep.lambda1.powf(0.5) / lhs).abs()
                <= 1e-12 * rep.residual_twosideconv
        );
        assert!(rep.residual_twosideconv.is_finite());
    }

    #[test]
    fn counterexample_sweep_rejects_degenerate_regime() {
        let fp = FracParams::new(0.5, 2.0).unwrap();
        let err = counterexample_sweep(1, &[0], 0.25, &fp).unwrap_err();
        assert!(err.to_string().contains("s*p"), "{err}");
    }

    #[test]
    fn counterexample_sweep_shows_separation() {
        let fp = FracParams::new(0.3, 2.0).unwrap();
        let rows = counterexample_sweep(1, &[0, 1, 2], 1.0 / 8.0, &fp).unwrap();
        assert_eq!(rows.len(), 3);
        for w in rows.windows(2) {
            assert!(
                w[1].lambda_s < w[0].lambda_s,
                "fractional constant should decrease: {} vs {}",
                w[1].lambda_s,
                w[0].lambda_s
            );
        }
        for r in &rows {
            assert!(r.lambda1 >= r.mu_cell * (1.0 - 1e-12), "n={}", r.n);
            assert!(r.lambda_s > 0.0 && r.ratio > 0.0);
        }
    }

    #[test]
    fn crack_insensitivity_of_fractional_constant_as_h_refines() {
        // sp < 1: one crack node carries vanishing weight, so the gap to the
        // uncracked constant shrinks monotonically under refinement.
        let fp = FracParams::new(0.3, 2.0).unwrap();
        let mut prev_gap = f64::INFINITY;
        for k in [8.0, 16.0, 32.0, 64.0] {
            let h = 1.0 / k;
            let plain = GridDomain::make_box_bounds(1, &[[-0.5, 0.5]], h).unwrap();
            let cracked = GridDomain::make_cracked_domain(1, 0, h).unwrap();
            let gap = lambda_s(&cracked, &fp).unwrap().value - lambda_s(&plain, &fp).unwrap().value;
            assert!(gap >= -1e-12, "constraining cannot lower the constant");
            assert!(gap < prev_gap, "gap should shrink: {gap} vs {prev_gap}");
            prev_gap = gap;
        }
    }
}
