//! Convex polygon geometry: inradius and Chebyshev center, eccentricity,
//! spherical-cone eccentricity, and the scaled-distance margin check.

use crate::error::{Error, Result};
use crate::params::TOL_GEOM;

/// Convex polygon with vertices in counterclockwise order.
#[derive(Clone, Debug)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

fn cross(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Distance from `p` to the segment `[a, b]`.
fn point_segment_distance(p: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, &[a[0] + t * d[0], a[1] + t * d[1]])
}

impl ConvexPolygon {
    /// Validates vertex count, orientation, and strict convexity.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!(
                "{} vertices, need at least 3",
                vertices.len()
            )));
        }
        let n = vertices.len();
        let scale: f64 = vertices
            .iter()
            .map(|v| v[0].abs().max(v[1].abs()))
            .fold(1.0, f64::max);
        for i in 0..n {
            let c = cross(&vertices[i], &vertices[(i + 1) % n], &vertices[(i + 2) % n]);
            if c <= 1e-12 * scale * scale {
                return Err(Error::DegeneratePolygon(format!(
                    "vertices must be strictly convex and counterclockwise (turn {i} has cross product {c:.3e})"
                )));
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                min[d] = min[d].min(v[d]);
                max[d] = max[d].max(v[d]);
            }
        }
        (min, max)
    }

    /// Inward edge normals and offsets: a point is inside iff
    /// `n_i . x - c_i >= 0` for every edge, and that quantity is its distance
    /// to the edge line.
    fn edge_planes(&self) -> Vec<([f64; 2], f64)> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let d = [b[0] - a[0], b[1] - a[1]];
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let nrm = [-d[1] / len, d[0] / len];
                (nrm, nrm[0] * a[0] + nrm[1] * a[1])
            })
            .collect()
    }

    /// True if the point lies strictly inside (positive distance to every
    /// edge line).
    pub fn contains_strictly(&self, p: &[f64; 2]) -> bool {
        self.edge_planes()
            .iter()
            .all(|(nrm, c)| nrm[0] * p[0] + nrm[1] * p[1] - c > 1e-12)
    }

    /// Distance from an interior point to the polygon boundary.
    pub fn boundary_distance(&self, p: &[f64; 2]) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| point_segment_distance(p, &self.vertices[i], &self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Chebyshev radius and center: the largest inscribed ball. Solved
    /// exactly by enumerating triples of active edge constraints; the optimal
    /// basic solution of the underlying linear program has three tight edges.
    pub fn inradius_incenter(&self) -> (f64, [f64; 2]) {
        let planes = self.edge_planes();
        let m = planes.len();
        let mut best_r = 0.0;
        let mut best_c = self.vertices[0];
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    // Solve n_q . x - r = c_q for q in {i, j, k}.
                    let rows = [planes[i], planes[j], planes[k]];
                    let a = [
                        [rows[0].0[0], rows[0].0[1], -1.0],
                        [rows[1].0[0], rows[1].0[1], -1.0],
                        [rows[2].0[0], rows[2].0[1], -1.0],
                    ];
                    let b = [rows[0].1, rows[1].1, rows[2].1];
                    let Some(x) = solve3(a, b) else { continue };
                    let (cand, r) = ([x[0], x[1]], x[2]);
                    if r <= best_r {
                        continue;
                    }
                    let feasible = planes
                        .iter()
                        .all(|(nrm, c)| nrm[0] * cand[0] + nrm[1] * cand[1] - c >= r - TOL_GEOM);
                    if feasible {
                        best_r = r;
                        best_c = cand;
                    }
                }
            }
        }
        (best_r, best_c)
    }

    /// Largest pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let n = self.vertices.len();
        let mut d = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                d = d.max(dist(&self.vertices[i], &self.vertices[j]));
            }
        }
        d
    }

    /// diam / (2 inradius); always >= 1, equal to sqrt(2) on squares.
    pub fn eccentricity(&self) -> f64 {
        let (r, _) = self.inradius_incenter();
        self.diameter() / (2.0 * r)
    }

    /// Points spread along the boundary by arclength, vertices included.
    pub fn boundary_samples(&self, n_samples: usize) -> Vec<[f64; 2]> {
        let n = self.vertices.len();
        let mut pts: Vec<[f64; 2]> = self.vertices.clone();
        let perimeter: f64 = (0..n)
            .map(|i| dist(&self.vertices[i], &self.vertices[(i + 1) % n]))
            .sum();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = dist(&a, &b);
            let k = ((n_samples as f64) * edge / perimeter).ceil() as usize;
            for q in 1..k {
                let t = q as f64 / k as f64;
                pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        pts
    }

    /// Minimum over boundary samples of the shrunken polygon
    /// `c + t (P - c)` of (distance to the original boundary) minus the
    /// prediction `(1 - t) r`. Nonnegative up to roundoff for convex sets.
    pub fn scaled_distance_margin(&self, t: f64, n_samples: usize) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Param(format!("shrink factor must lie in (0,1), got {t}")));
        }
        let (r, c) = self.inradius_incenter();
        let margin = self
            .boundary_samples(n_samples)
            .iter()
            .map(|p| {
                let q = [c[0] + t * (p[0] - c[0]), c[1] + t * (p[1] - c[1])];
                self.boundary_distance(&q) - (1.0 - t) * r
            })
            .fold(f64::INFINITY, f64::min);
        Ok(margin)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&a[r]);
        m[r][3] = b[r];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Eccentricity of the spherical cone `{x : x . e > beta |x|}` intersected
/// with the unit ball:
/// `(1/2) max(2 sqrt(1 - beta^2), 1) (1 + 1/sqrt(1 - beta^2))`.
pub fn cone_eccentricity(beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Param(format!("cone aperture must lie in [0,1), got {beta}")));
    }
    let w = (1.0 - beta * beta).sqrt();
    Ok(0.5 * (2.0 * w).max(1.0) * (1.0 + 1.0 / w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn unit_square_incircle() {
        let (r, c) = unit_square().inradius_incenter();
        assert!((r - 0.5).abs() < 1e-12);
        assert!((c[0] - 0.5).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn equilateral_triangle_inradius_matches_closed_form() {
        // Side 1: r = 1 / (2 sqrt(3)) = 0.28867513459481287.
        let h = 3f64.sqrt() / 2.0;
        let tri = ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, h]]).unwrap();
        let (r, _) = tri.inradius_incenter();
        assert!((r - 0.288_675_134_594_812_87).abs() < 1e-12);
    }

    #[test]
    fn square_eccentricity_is_sqrt2() {
        assert!((unit_square().eccentricity() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn long_rectangle_eccentricity() {
        // 2 x 1/2 rectangle: diam = sqrt(4.25), r = 1/4.
        let rect = ConvexPolygon::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 0.5], [0.0, 0.5]]).unwrap();
        let (r, _) = rect.inradius_incenter();
        assert!((r - 0.25).abs() < 1e-12);
        assert!((rect.eccentricity() - 4.25f64.sqrt() / 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_gon_is_rejected() {
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // Collinear chain is degenerate too.
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
    }

    #[test]
    fn half_space_cone_eccentricity_is_two() {
        assert_eq!(cone_eccentricity(0.0).unwrap(), 2.0);
    }

    #[test]
    fn cone_eccentricity_closed_form_sample() {
        // beta = sqrt(3)/2: sqrt(1-beta^2) = 1/2, value (1/2)*1*(1+2) = 3/2.
        let e = cone_eccentricity(3f64.sqrt() / 2.0).unwrap();
        assert!((e - 1.5).abs() < 1e-12);
        assert!(cone_eccentricity(1.0).is_err());
        assert!(cone_eccentricity(-0.1).is_err());
    }

    #[test]
    fn scaled_distance_margin_nonnegative_on_square() {
        let sq = unit_square();
        for t in [0.1, 0.5, 0.9] {
            let m = sq.scaled_distance_margin(t, 200).unwrap();
            assert!(m >= -TOL_GEOM, "t = {t}: margin {m}");
        }
        // t -> 0 pushes the shrunken set to the incenter, distance -> r.
        let m = sq.scaled_distance_margin(1e-6, 50).unwrap();
        assert!(m.abs() < 1e-5);
    }

    #[test]
    fn regular_64_gon_stays_exact() {
        let n = 64;
        let verts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let poly = ConvexPolygon::new(verts).unwrap();
        let (r, c) = poly.inradius_incenter();
        // Inradius of a regular n-gon with circumradius 1: cos(pi/n).
        let expect = (std::f64::consts::PI / n as f64).cos();
        assert!((r - expect).abs() < 1e-9);
        assert!(c[0].abs() < 1e-9 && c[1].abs() < 1e-9);
    }
}
