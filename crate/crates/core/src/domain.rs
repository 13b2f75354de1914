//! Grid domains: axis-aligned boxes on a global lattice with node masks.
//!
//! A domain is a box of lattice nodes (coordinates `index * h`) split into
//! `Active` nodes, where grid functions may be nonzero, and `Constrained`
//! nodes forced to zero (box boundary, crack nodes, nodes outside an embedded
//! polygon). Functions are extended by zero beyond the box.

use crate::error::{Error, Result};
use crate::geometry::ConvexPolygon;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Active,
    Constrained,
}

/// Axis-aligned codimension-one crack, specified in lattice coordinates.
///
/// In dimension 1 a crack is the single node at `center` (`half_extent` 0);
/// in dimension 2 it is the horizontal segment
/// `[center.x - half_extent, center.x + half_extent] x {center.y}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crack {
    pub center: Vec<f64>,
    pub half_extent: f64,
}

/// Serializable description of a grid domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    pub h: f64,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub box_bounds: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crack_list: Option<Vec<Crack>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polygon_vertices: Option<Vec<[f64; 2]>>,
}

/// Lattice box with node masks. Node coordinates are `index * h` per axis,
/// so domains built on the same spacing share one global lattice.
#[derive(Clone, Debug)]
pub struct GridDomain {
    dim: usize,
    h: f64,
    lo: [i64; 2],
    hi: [i64; 2],
    status: Vec<NodeStatus>,
    active_to_box: Vec<usize>,
    box_to_active: Vec<u32>,
    spec: DomainSpec,
}

const NO_ACTIVE: u32 = u32::MAX;

/// Checks that `x` is an integer multiple of `h` and returns the multiple.
fn lattice_multiple(x: f64, h: f64, what: &str) -> Result<i64> {
    let q = x / h;
    let r = q.round();
    if (q - r).abs() > 1e-9 * q.abs().max(1.0) {
        return Err(Error::Config(format!(
            "{what} = {x} is not an integer multiple of the spacing h = {h}"
        )));
    }
    Ok(r as i64)
}

/// Expands crack descriptions into the set of lattice nodes they occupy,
/// checking lattice alignment and containment in `[lo, hi]`.
fn resolve_crack_nodes(
    dim: usize,
    cracks: &[Crack],
    h: f64,
    lo: [i64; 2],
    hi: [i64; 2],
) -> Result<std::collections::BTreeSet<[i64; 2]>> {
    let mut crack_nodes = std::collections::BTreeSet::new();
    for c in cracks {
        if c.center.len() != dim {
            return Err(Error::Config("crack center has wrong dimension".into()));
        }
        let mut ctr = [0i64; 2];
        for d in 0..dim {
            ctr[d] = lattice_multiple(c.center[d], h, "crack center")?;
        }
        let reach = lattice_multiple(c.half_extent, h, "crack half extent")?;
        if dim == 1 && reach != 0 {
            return Err(Error::Config("a crack in dimension 1 is a single point".into()));
        }
        let ks: Vec<i64> = if dim == 2 { (-reach..=reach).collect() } else { vec![0] };
        for k in ks {
            let node = [ctr[0] + k, if dim == 2 { ctr[1] } else { 0 }];
            if (0..dim).any(|d| node[d] < lo[d] || node[d] > hi[d]) {
                return Err(Error::Config(format!(
                    "crack node {:?} falls outside the box",
                    node
                )));
            }
            crack_nodes.insert([node[0], node[1]]);
        }
    }
    Ok(crack_nodes)
}

impl GridDomain {
    fn build(
        dim: usize,
        h: f64,
        lo: [i64; 2],
        hi: [i64; 2],
        mut constrain: impl FnMut([i64; 2]) -> bool,
        spec: DomainSpec,
    ) -> Result<Arc<Self>> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {h}")));
        }
        for d in 0..dim {
            if hi[d] < lo[d] {
                return Err(Error::Config("empty box".into()));
            }
        }
        let n0 = (hi[0] - lo[0] + 1) as usize;
        let n1 = if dim == 2 { (hi[1] - lo[1] + 1) as usize } else { 1 };
        let count = n0 * n1;
        let mut status = Vec::with_capacity(count);
        let mut active_to_box = Vec::new();
        let mut box_to_active = vec![NO_ACTIVE; count];
        for i0 in lo[0]..=hi[0] {
            for i1 in lo[1]..=(if dim == 2 { hi[1] } else { lo[1] }) {
                let idx = status.len();
                if constrain([i0, i1]) {
                    status.push(NodeStatus::Constrained);
                } else {
                    box_to_active[idx] = active_to_box.len() as u32;
                    active_to_box.push(idx);
                    status.push(NodeStatus::Active);
                }
            }
        }
        Ok(Arc::new(GridDomain {
            dim,
            h,
            lo,
            hi,
            status,
            active_to_box,
            box_to_active,
            spec,
        }))
    }

    /// Unit-style box `[0, side]^dim` with zero boundary conditions: boundary
    /// nodes constrained, interior nodes active.
    pub fn make_box(dim: usize, side: f64, h: f64) -> Result<Arc<Self>> {
        let cells = lattice_multiple(side, h, "box side")?;
        if cells < 1 {
            return Err(Error::Config(format!("box side {side} below one cell of {h}")));
        }
        Self::make_box_bounds(dim, &vec![[0.0, side]; dim], h)
    }

    /// Box with explicit per-axis bounds (lattice-aligned), zero boundary.
    pub fn make_box_bounds(dim: usize, bounds: &[[f64; 2]], h: f64) -> Result<Arc<Self>> {
        if bounds.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} axis bounds, got {}",
                bounds.len()
            )));
        }
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for d in 0..dim {
            lo[d] = lattice_multiple(bounds[d][0], h, "box lower bound")?;
            hi[d] = lattice_multiple(bounds[d][1], h, "box upper bound")?;
            if hi[d] <= lo[d] {
                return Err(Error::Config("box upper bound must exceed lower bound".into()));
            }
        }
        let spec = DomainSpec {
            dim,
            h,
            box_bounds: Some(bounds.to_vec()),
            crack_list: None,
            polygon_vertices: None,
        };
        let (blo, bhi) = (lo, hi);
        Self::build(
            dim,
            h,
            lo,
            hi,
            move |i| (0..dim).any(|d| i[d] == blo[d] || i[d] == bhi[d]),
            spec,
        )
    }

    /// Box with every node active, including the boundary layer. Pair sums
    /// over such a domain see no constrained complement inside the box.
    pub fn make_box_free(dim: usize, bounds: &[[f64; 2]], h: f64) -> Result<Arc<Self>> {
        if bounds.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} axis bounds, got {}",
                bounds.len()
            )));
        }
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for d in 0..dim {
            lo[d] = lattice_multiple(bounds[d][0], h, "box lower bound")?;
            hi[d] = lattice_multiple(bounds[d][1], h, "box upper bound")?;
            if hi[d] <= lo[d] {
                return Err(Error::Config("box upper bound must exceed lower bound".into()));
            }
        }
        let spec = DomainSpec {
            dim,
            h,
            box_bounds: Some(bounds.to_vec()),
            crack_list: None,
            polygon_vertices: None,
        };
        Self::build(dim, h, lo, hi, |_| false, spec)
    }

    /// Cracked cube family: the box `[-(n+1/2), n+1/2]^dim` with zero boundary
    /// and one crack per integer translate `z`, `max|z_d| <= n`. In dimension 1
    /// the crack is the node `{z}`; in dimension 2 the segment
    /// `[z_0 - 1/4, z_0 + 1/4] x {z_1}`.
    pub fn make_cracked_domain(dim: usize, n: i64, h: f64) -> Result<Arc<Self>> {
        if n < 0 {
            return Err(Error::Config(format!("crack layer count must be >= 0, got {n}")));
        }
        let m = lattice_multiple(1.0, h, "unit cell")?;
        if m < 1 {
            return Err(Error::Config(format!("spacing {h} exceeds the unit cell")));
        }
        if ((2 * n + 1) * m) % 2 != 0 {
            return Err(Error::Config(format!(
                "box corner (n + 1/2) = {} is not on the lattice of spacing {h}",
                n as f64 + 0.5
            )));
        }
        if dim == 2 && m % 4 != 0 {
            return Err(Error::Config(format!(
                "crack endpoints at 1/4 are not on the lattice of spacing {h}"
            )));
        }
        let mut cracks = Vec::new();
        let half = if dim == 2 { 0.25 } else { 0.0 };
        for z0 in -n..=n {
            if dim == 1 {
                cracks.push(Crack { center: vec![z0 as f64], half_extent: half });
            } else {
                for z1 in -n..=n {
                    cracks.push(Crack {
                        center: vec![z0 as f64, z1 as f64],
                        half_extent: half,
                    });
                }
            }
        }
        let side = n as f64 + 0.5;
        Self::make_box_with_cracks(dim, &vec![[-side, side]; dim], &cracks, h)
    }

    /// Box with zero boundary plus explicit crack nodes constrained to zero.
    pub fn make_box_with_cracks(
        dim: usize,
        bounds: &[[f64; 2]],
        cracks: &[Crack],
        h: f64,
    ) -> Result<Arc<Self>> {
        let base = Self::make_box_bounds(dim, bounds, h)?;
        let crack_nodes = resolve_crack_nodes(dim, cracks, h, base.lo, base.hi)?;
        let spec = DomainSpec {
            dim,
            h,
            box_bounds: Some(bounds.to_vec()),
            crack_list: Some(cracks.to_vec()),
            polygon_vertices: None,
        };
        let (blo, bhi) = (base.lo, base.hi);
        Self::build(
            dim,
            h,
            base.lo,
            base.hi,
            move |i| {
                (0..dim).any(|d| i[d] == blo[d] || i[d] == bhi[d])
                    || crack_nodes.contains(&[i[0], if dim == 2 { i[1] } else { 0 }])
            },
            spec,
        )
    }

    /// Box whose only constrained nodes are the cracks: the outer boundary
    /// layer stays active, so box-internal difference forms see natural
    /// (no-flux) behaviour at the box walls and zero values on the cracks.
    pub fn make_free_box_with_cracks(
        dim: usize,
        bounds: &[[f64; 2]],
        cracks: &[Crack],
        h: f64,
    ) -> Result<Arc<Self>> {
        let base = Self::make_box_free(dim, bounds, h)?;
        let crack_nodes = resolve_crack_nodes(dim, cracks, h, base.lo, base.hi)?;
        if crack_nodes.is_empty() {
            return Err(Error::Config(
                "a mixed cell needs at least one crack node to pin the quotient".into(),
            ));
        }
        let spec = DomainSpec {
            dim,
            h,
            box_bounds: Some(bounds.to_vec()),
            crack_list: Some(cracks.to_vec()),
            polygon_vertices: None,
        };
        Self::build(
            dim,
            h,
            base.lo,
            base.hi,
            move |i| crack_nodes.contains(&[i[0], if dim == 2 { i[1] } else { 0 }]),
            spec,
        )
    }

    /// Grid discretization of a convex polygon: nodes strictly inside are
    /// active, everything else in the bounding box (one cell of margin) is
    /// constrained.
    pub fn from_polygon(poly: &ConvexPolygon, h: f64) -> Result<Arc<Self>> {
        let (min, max) = poly.bounding_box();
        let lo = [
            (min[0] / h).floor() as i64 - 1,
            (min[1] / h).floor() as i64 - 1,
        ];
        let hi = [(max[0] / h).ceil() as i64 + 1, (max[1] / h).ceil() as i64 + 1];
        let spec = DomainSpec {
            dim: 2,
            h,
            box_bounds: Some(vec![
                [lo[0] as f64 * h, hi[0] as f64 * h],
                [lo[1] as f64 * h, hi[1] as f64 * h],
            ]),
            crack_list: None,
            polygon_vertices: Some(poly.vertices().to_vec()),
        };
        let p = poly.clone();
        Self::build(
            2,
            h,
            lo,
            hi,
            move |i| !p.contains_strictly(&[i[0] as f64 * h, i[1] as f64 * h]),
            spec,
        )
    }

    /// Rebuilds a domain from its serializable description.
    pub fn from_spec(spec: &DomainSpec) -> Result<Arc<Self>> {
        if let Some(verts) = &spec.polygon_vertices {
            let poly = ConvexPolygon::new(verts.clone())?;
            return Self::from_polygon(&poly, spec.h);
        }
        let bounds = spec
            .box_bounds
            .as_ref()
            .ok_or_else(|| Error::Config("domain spec needs box bounds or polygon vertices".into()))?;
        match &spec.crack_list {
            Some(cracks) => Self::make_box_with_cracks(spec.dim, bounds, cracks, spec.h),
            None => Self::make_box_bounds(spec.dim, bounds, spec.h),
        }
    }

    /// Geometric dilation by `factor`: same lattice indices and masks, spacing
    /// `factor * h`. Every pairwise distance scales exactly by `factor`.
    pub fn dilate(&self, factor: f64) -> Result<Arc<Self>> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!("dilation factor must be positive, got {factor}")));
        }
        let mut spec = self.spec.clone();
        spec.h = self.h * factor;
        if let Some(b) = &mut spec.box_bounds {
            for ax in b.iter_mut() {
                ax[0] *= factor;
                ax[1] *= factor;
            }
        }
        if let Some(cracks) = &mut spec.crack_list {
            for c in cracks.iter_mut() {
                for x in c.center.iter_mut() {
                    *x *= factor;
                }
                c.half_extent *= factor;
            }
        }
        if let Some(v) = &mut spec.polygon_vertices {
            for x in v.iter_mut() {
                x[0] *= factor;
                x[1] *= factor;
            }
        }
        Ok(Arc::new(GridDomain {
            dim: self.dim,
            h: self.h * factor,
            lo: self.lo,
            hi: self.hi,
            status: self.status.clone(),
            active_to_box: self.active_to_box.clone(),
            box_to_active: self.box_to_active.clone(),
            spec,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Total number of box nodes.
    pub fn node_count(&self) -> usize {
        self.status.len()
    }

    pub fn active_count(&self) -> usize {
        self.active_to_box.len()
    }

    /// Nodes per axis (axis 1 reports 1 in dimension 1).
    pub fn extent(&self, axis: usize) -> usize {
        if axis >= self.dim {
            1
        } else {
            (self.hi[axis] - self.lo[axis] + 1) as usize
        }
    }

    pub fn lo(&self) -> [i64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [i64; 2] {
        self.hi
    }

    /// Flat index of a lattice node, if it lies in the box.
    pub fn box_index(&self, node: [i64; 2]) -> Option<usize> {
        for d in 0..self.dim {
            if node[d] < self.lo[d] || node[d] > self.hi[d] {
                return None;
            }
        }
        let n1 = self.extent(1);
        let off1 = if self.dim == 2 { (node[1] - self.lo[1]) as usize } else { 0 };
        Some(((node[0] - self.lo[0]) as usize) * n1 + off1)
    }

    /// Lattice indices of a box node.
    pub fn node_of(&self, box_idx: usize) -> [i64; 2] {
        let n1 = self.extent(1);
        let i0 = self.lo[0] + (box_idx / n1) as i64;
        let i1 = if self.dim == 2 { self.lo[1] + (box_idx % n1) as i64 } else { 0 };
        [i0, i1]
    }

    /// Coordinates of a box node.
    pub fn coords(&self, box_idx: usize) -> [f64; 2] {
        let n = self.node_of(box_idx);
        [n[0] as f64 * self.h, n[1] as f64 * self.h]
    }

    pub fn status(&self, box_idx: usize) -> NodeStatus {
        self.status[box_idx]
    }

    pub fn is_active(&self, box_idx: usize) -> bool {
        self.status[box_idx] == NodeStatus::Active
    }

    /// Box index of the `k`-th active node.
    pub fn active_box_index(&self, active_idx: usize) -> usize {
        self.active_to_box[active_idx]
    }

    /// Active index of a box node, if active.
    pub fn active_index(&self, box_idx: usize) -> Option<usize> {
        let a = self.box_to_active[box_idx];
        (a != NO_ACTIVE).then_some(a as usize)
    }

    /// True if every active node of `self` is an active node of `big` on the
    /// same lattice.
    pub fn is_nested_in(&self, big: &GridDomain) -> bool {
        if self.dim != big.dim {
            return false;
        }
        if (self.h - big.h).abs() > 1e-12 * self.h {
            return false;
        }
        self.active_to_box.iter().all(|&b| {
            let node = self.node_of(b);
            big.box_index(node)
                .map(|idx| big.is_active(idx))
                .unwrap_or(false)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("domain spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Arc<Self>> {
        let spec: DomainSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("domain json: {e}")))?;
        Self::from_spec(&spec)
    }
}
