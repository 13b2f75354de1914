//! Grid functions and the discrete norms and seminorms built on them.
//!
//! Quadrature is the node rule: a function value owns the cell volume `h^N`.
//! The nonlocal double sum runs over ordered pairs of box nodes with the
//! diagonal excluded and functions extended by zero; its summation order is
//! fixed (lexicographic) with compensated block accumulation, so parallel and
//! sequential evaluation agree to roundoff.

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::params::FracParams;
use crate::sum::{comp_sum, det_par_sum, Accum};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Real-valued function on the active nodes of a grid domain; constrained
/// nodes and the exterior are identically zero.
#[derive(Clone, Debug)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

/// Raw values over every box node, used by mollification and rescaling
/// before masking back onto a domain.
#[derive(Clone, Debug)]
pub struct BoxField {
    pub domain: Arc<GridDomain>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.active_count() {
            return Err(Error::Config(format!(
                "value count {} does not match active node count {}",
                values.len(),
                domain.active_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid function values must be finite".into()));
        }
        Ok(GridFunction { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let values = vec![0.0; domain.active_count()];
        GridFunction { domain, values }
    }

    /// Samples `f` at the coordinates of each active node.
    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..domain.active_count())
            .map(|a| {
                let c = domain.coords(domain.active_box_index(a));
                f(&c[..domain.dim()])
            })
            .collect();
        GridFunction { domain, values }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Dense values over all box nodes (zero where constrained).
    pub fn box_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.node_count()];
        for a in 0..self.values.len() {
            out[self.domain.active_box_index(a)] = self.values[a];
        }
        out
    }

    /// Value at a lattice node, zero outside the active set.
    pub fn at_node(&self, node: [i64; 2]) -> f64 {
        self.domain
            .box_index(node)
            .and_then(|b| self.domain.active_index(b))
            .map_or(0.0, |a| self.values[a])
    }

    pub fn pointwise_max(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, f64::max)
    }

    pub fn pointwise_min(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, f64::min)
    }

    fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if !Arc::ptr_eq(&self.domain, &other.domain)
            && self.domain.node_count() != other.domain.node_count()
        {
            return Err(Error::Config("grid functions live on different domains".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridFunction { domain: self.domain.clone(), values })
    }

    pub fn to_data(&self) -> GridFunctionData {
        let d = &self.domain;
        GridFunctionData {
            nodes: (0..self.values.len())
                .map(|a| {
                    let c = d.coords(d.active_box_index(a));
                    c[..d.dim()].to_vec()
                })
                .collect(),
            values: self.values.clone(),
        }
    }

    /// CSV rows `x[,y],value`, one active node per line.
    pub fn to_csv(&self) -> String {
        let d = &self.domain;
        let mut out = String::from(if d.dim() == 1 { "x,value\n" } else { "x,y,value\n" });
        for a in 0..self.values.len() {
            let c = d.coords(d.active_box_index(a));
            if d.dim() == 1 {
                out.push_str(&format!("{:.16e},{:.16e}\n", c[0], self.values[a]));
            } else {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", c[0], c[1], self.values[a]));
            }
        }
        out
    }
}

/// Serializable view of a grid function: node coordinates plus values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFunctionData {
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl BoxField {
    /// Masks onto the active set and reports the largest magnitude the field
    /// had on constrained nodes (which the mask discards).
    pub fn into_grid_function(self) -> (GridFunction, f64) {
        let mut violation = 0.0f64;
        let mut values = vec![0.0; self.domain.active_count()];
        for (b, &v) in self.values.iter().enumerate() {
            match self.domain.active_index(b) {
                Some(a) => values[a] = v,
                None => violation = violation.max(v.abs()),
            }
        }
        (GridFunction { domain: self.domain, values }, violation)
    }
}

pub(crate) fn powp(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

/// `|x|^(p-1) sign(x)`, the derivative of `|x|^p / p`.
pub(crate) fn powp_prime(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(p - 1.0)
    }
}

/// p-th power of the L^p norm: `h^N sum |u_i|^p`.
pub fn lp_norm_pow(u: &GridFunction, p: f64) -> f64 {
    let hn = u.domain().h().powi(u.domain().dim() as i32);
    hn * comp_sum(u.values().len(), |i| powp(u.values()[i], p))
}

pub fn lp_norm(u: &GridFunction, p: f64) -> f64 {
    lp_norm_pow(u, p).powf(1.0 / p)
}

/// p-th power of the gradient seminorm with zero extension: forward
/// differences are taken at every lattice node that sees the function, so a
/// nonzero value next to a constrained node pays the jump to zero.
pub fn grad_seminorm_pow(u: &GridFunction, p: f64) -> f64 {
    grad_pow_impl(u, p, false)
}

pub fn grad_seminorm(u: &GridFunction, p: f64) -> f64 {
    grad_seminorm_pow(u, p).powf(1.0 / p)
}

/// p-th power of the gradient seminorm using only differences between box
/// nodes (no boundary jump): the natural-boundary Dirichlet form.
pub fn grad_seminorm_box_pow(u: &GridFunction, p: f64) -> f64 {
    grad_pow_impl(u, p, true)
}

fn grad_pow_impl(u: &GridFunction, p: f64, interior_only: bool) -> f64 {
    let d = u.domain();
    let dim = d.dim();
    let h = d.h();
    let hn = h.powi(dim as i32);
    let vals = u.box_values();
    let lo = d.lo();
    let hi = d.hi();
    // Extended index range: one extra layer so jumps onto the box are seen.
    let (start, n0, n1);
    if interior_only {
        start = lo;
        n0 = (hi[0] - lo[0] + 1) as usize;
        n1 = if dim == 2 { (hi[1] - lo[1] + 1) as usize } else { 1 };
    } else {
        start = [lo[0] - 1, lo[1] - 1];
        n0 = (hi[0] - lo[0] + 2) as usize;
        n1 = if dim == 2 { (hi[1] - lo[1] + 2) as usize } else { 1 };
    }
    let value_at = |node: [i64; 2]| -> f64 {
        d.box_index(node).map_or(0.0, |b| vals[b])
    };
    let total = det_par_sum(n0 * n1, |flat| {
        let i0 = start[0] + (flat / n1) as i64;
        let i1 = if dim == 2 { start[1] + (flat % n1) as i64 } else { 0 };
        let here = value_at([i0, i1]);
        let mut sq = 0.0;
        for ax in 0..dim {
            let mut nb = [i0, i1];
            nb[ax] += 1;
            if interior_only && (nb[0] > hi[0] || (dim == 2 && nb[1] > hi[1])) {
                continue;
            }
            let diff = (value_at(nb) - here) / h;
            sq += diff * diff;
        }
        if sq == 0.0 {
            0.0
        } else if p == 2.0 {
            sq
        } else {
            sq.powf(0.5 * p)
        }
    });
    hn * total
}

/// Table of `r^-(N+sp)` over integer lattice offsets, shared by all pair sums
/// on one domain. Index by absolute offsets.
pub struct KernelTable {
    n0: usize,
    n1: usize,
    table: Vec<f64>,
}

impl KernelTable {
    pub fn new(domain: &GridDomain, fp: &FracParams) -> Self {
        let n0 = domain.extent(0);
        let n1 = domain.extent(1);
        let expo = -0.5 * (domain.dim() as f64 + fp.sp());
        let mut table = vec![0.0; n0 * n1];
        for a in 0..n0 {
            for b in 0..n1 {
                let r2 = (a * a + b * b) as f64;
                table[a * n1 + b] = if r2 == 0.0 { 0.0 } else { r2.powf(expo) };
            }
        }
        KernelTable { n0, n1, table }
    }

    #[inline]
    pub fn at(&self, di: i64, dj: i64) -> f64 {
        let a = di.unsigned_abs() as usize;
        let b = dj.unsigned_abs() as usize;
        debug_assert!(a < self.n0 && b < self.n1);
        self.table[a * self.n1 + b]
    }
}

/// p-th power of the nonlocal double sum
/// `h^{2N} sum_{i != j} |u_i - u_j|^p / |x_i - x_j|^{N + sp}`
/// over box node pairs, with the function extended by zero.
pub fn gagliardo_global_pow(u: &GridFunction, fp: &FracParams) -> f64 {
    let kt = KernelTable::new(u.domain(), fp);
    gagliardo_global_pow_with(u, fp, &kt)
}

pub fn gagliardo_global_pow_with(u: &GridFunction, fp: &FracParams, kt: &KernelTable) -> f64 {
    pair_sum(u, fp, kt, true)
}

pub fn gagliardo_global(u: &GridFunction, fp: &FracParams) -> f64 {
    gagliardo_global_pow(u, fp).powf(1.0 / fp.p)
}

/// Variant restricted to pairs of active nodes (no interaction with the
/// constrained complement).
pub fn gagliardo_local_pow(u: &GridFunction, fp: &FracParams) -> f64 {
    let kt = KernelTable::new(u.domain(), fp);
    pair_sum(u, fp, &kt, false)
}

pub fn gagliardo_local(u: &GridFunction, fp: &FracParams) -> f64 {
    gagliardo_local_pow(u, fp).powf(1.0 / fp.p)
}

fn pair_sum(u: &GridFunction, fp: &FracParams, kt: &KernelTable, with_complement: bool) -> f64 {
    let d = u.domain();
    let dim = d.dim();
    let p = fp.p;
    let vals = u.box_values();
    let active: Vec<bool> = (0..d.node_count()).map(|b| d.is_active(b)).collect();
    let nodes: Vec<[i64; 2]> = (0..d.node_count()).map(|b| d.node_of(b)).collect();
    let a_count = d.active_count();
    // Ordered pairs (i, j) with i active are enumerated from the i side; the
    // two orders of an active/constrained pair are both charged to i.
    let inner = det_par_sum(a_count, |a| {
        let bi = d.active_box_index(a);
        let ui = vals[bi];
        let ni = nodes[bi];
        let mut acc = Accum::default();
        for bj in 0..vals.len() {
            if bj == bi {
                continue;
            }
            let nj = nodes[bj];
            let k = kt.at(ni[0] - nj[0], ni[1] - nj[1]);
            if active[bj] {
                acc.add(powp(ui - vals[bj], p) * k);
            } else if with_complement {
                acc.add(2.0 * powp(ui, p) * k);
            }
        }
        acc.value()
    });
    let h = d.h();
    h.powf(dim as f64 - fp.sp()) * inner
}

/// L^p norm of the shift difference `u(. + shift) - u(.)` over the whole
/// lattice (zero extension). `shift` must be a lattice vector.
pub fn difference_profile(u: &GridFunction, p: f64, shift: &[f64]) -> Result<f64> {
    let d = u.domain();
    let dim = d.dim();
    if shift.len() != dim {
        return Err(Error::Param(format!(
            "shift has dimension {}, domain has {}",
            shift.len(),
            dim
        )));
    }
    let h = d.h();
    let mut o = [0i64; 2];
    for ax in 0..dim {
        let q = shift[ax] / h;
        let r = q.round();
        if (q - r).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(Error::Param(format!(
                "shift component {} is not a lattice multiple of h = {h}",
                shift[ax]
            )));
        }
        o[ax] = r as i64;
    }
    Ok(difference_profile_lattice(u, p, o))
}

/// Same as [`difference_profile`] for an integer lattice offset.
pub fn difference_profile_lattice(u: &GridFunction, p: f64, o: [i64; 2]) -> f64 {
    let d = u.domain();
    let dim = d.dim();
    let lo = d.lo();
    let hi = d.hi();
    let vals = u.box_values();
    let value_at = |node: [i64; 2]| d.box_index(node).map_or(0.0, |b| vals[b]);
    let s0 = lo[0].min(lo[0] - o[0]);
    let e0 = hi[0].max(hi[0] - o[0]);
    let (s1, e1) = if dim == 2 {
        (lo[1].min(lo[1] - o[1]), hi[1].max(hi[1] - o[1]))
    } else {
        (0, 0)
    };
    let n1 = (e1 - s1 + 1) as usize;
    let n = (e0 - s0 + 1) as usize * n1;
    let total = det_par_sum(n, |flat| {
        let i0 = s0 + (flat / n1) as i64;
        let i1 = if dim == 2 { s1 + (flat % n1) as i64 } else { 0 };
        let diff = value_at([i0 + o[0], i1 + o[1]]) - value_at([i0, i1]);
        powp(diff, p)
    });
    (d.h().powi(dim as i32) * total).powf(1.0 / p)
}

/// Spherical mean of the difference profile at radius `rho`, shifts rounded
/// to the lattice. In dimension 1 this is the two-sided average; in
/// dimension 2 a uniform average over `n_angles` directions.
pub fn spherical_average(u: &GridFunction, p: f64, rho: f64, n_angles: usize) -> Result<f64> {
    let d = u.domain();
    if !(rho > 0.0) {
        return Err(Error::Param(format!("radius must be positive, got {rho}")));
    }
    let h = d.h();
    if d.dim() == 1 {
        let k = (rho / h).round() as i64;
        let up = difference_profile_lattice(u, p, [k, 0]);
        let dn = difference_profile_lattice(u, p, [-k, 0]);
        return Ok(0.5 * (up + dn));
    }
    if n_angles == 0 {
        return Err(Error::Param("need at least one angular sample".into()));
    }
    let mut acc = Accum::default();
    for j in 0..n_angles {
        let th = 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64;
        let o = [
            (rho * th.cos() / h).round() as i64,
            (rho * th.sin() / h).round() as i64,
        ];
        acc.add(difference_profile_lattice(u, p, o));
    }
    Ok(acc.value() / n_angles as f64)
}

/// Dimensional constants: the unit-ball volume `omega_N`, the directional
/// moment `alpha_{N,p} = (1/p) int_{S^{N-1}} |w . e|^p dH`, and
/// `beta_{N,p} = 2 N omega_N / p`.
#[derive(Clone, Copy, Debug)]
pub struct MathConstants {
    pub dim: usize,
    pub p: f64,
    pub omega_n: f64,
    pub alpha_np: f64,
    pub beta_np: f64,
}

impl MathConstants {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        let omega_n = match dim {
            1 => 2.0,
            2 => std::f64::consts::PI,
            _ => return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}"))),
        };
        let alpha_np = match dim {
            1 => 2.0 / p,
            _ => {
                // (1/p) * 4 * int_0^{pi/2} cos^p, by composite Simpson.
                let n = 1 << 14;
                let a = 0.0;
                let b = std::f64::consts::FRAC_PI_2;
                let w = (b - a) / n as f64;
                let f = |t: f64| t.cos().max(0.0).powf(p);
                let mut s = f(a) + f(b);
                for i in 1..n {
                    let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += c * f(a + i as f64 * w);
                }
                4.0 * (w / 3.0) * s / p
            }
        };
        Ok(MathConstants {
            dim,
            p,
            omega_n,
            alpha_np,
            beta_np: 2.0 * dim as f64 * omega_n / p,
        })
    }
}
