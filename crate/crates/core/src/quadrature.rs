//! Gauss rules on segments and fan-triangulated polygons, and scaled-monomial moments.

use crate::error::{Result, VemError};
use crate::mesh::{triangle_signed_area, CellGeometry, Point};

/// Gauss–Legendre rule on the reference segment `[0, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    /// Integrates `f(t)` over `[0, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // returns (P_n(z), P_n'(z))
    let legendre = |z: f64| {
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
    };
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n % 2 == 1 && i == n / 2 {
            z = 0.0;
        }
        let (_, dp) = legendre(z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss rule on `[0, 1]` exact for polynomials of the given degree.
pub fn edge_rule(degree: usize) -> EdgeRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    EdgeRule {
        points: x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree,
    }
}

/// Reference-triangle rule on `{(s, t) : s, t >= 0, s + t <= 1}`; weights sum to 1/2.
#[derive(Clone, Debug)]
struct TriangleRule {
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

fn triangle_rule(degree: usize) -> TriangleRule {
    match degree {
        0 | 1 => TriangleRule {
            points: vec![(1.0 / 3.0, 1.0 / 3.0)],
            weights: vec![0.5],
        },
        2 => TriangleRule {
            points: vec![(1.0 / 6.0, 1.0 / 6.0), (2.0 / 3.0, 1.0 / 6.0), (1.0 / 6.0, 2.0 / 3.0)],
            weights: vec![1.0 / 6.0; 3],
        },
        _ => collapsed_rule(degree),
    }
}

/// Conical product rule: Gauss in `u` and Gauss in `v` on the square mapped by
/// `s = u, t = v(1 - u)`; the Jacobian `(1 - u)` raises the `u` degree by one.
fn collapsed_rule(degree: usize) -> TriangleRule {
    let gu = edge_rule(degree + 1);
    let gv = edge_rule(degree);
    let mut points = Vec::with_capacity(gu.points.len() * gv.points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&u, &wu) in gu.points.iter().zip(&gu.weights) {
        for (&v, &wv) in gv.points.iter().zip(&gv.weights) {
            points.push((u, v * (1.0 - u)));
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Physical quadrature rule on one polygon.
#[derive(Clone, Debug)]
pub struct PolygonRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
    pub triangles: Vec<[Point; 3]>,
}

impl PolygonRule {
    pub fn integrate<F: FnMut(&Point) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, &w)| w * f(p)).sum()
    }
}

/// Triangulation by ear clipping of a simple counter-clockwise polygon.
fn ear_clip(poly: &[Point]) -> Option<Vec<[Point; 3]>> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len() - 2);
    let scale = poly.iter().map(|p| p.coords.norm()).fold(1.0, f64::max);
    let tol = 1e-14 * scale * scale;
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (a, b, c) = (poly[idx[(i + n - 1) % n]], poly[idx[i]], poly[idx[(i + 1) % n]]);
            if triangle_signed_area(&a, &b, &c) <= tol {
                continue;
            }
            let inside = idx.iter().any(|&j| {
                let p = poly[j];
                p != a
                    && p != b
                    && p != c
                    && triangle_signed_area(&a, &b, &p) >= 0.0
                    && triangle_signed_area(&b, &c, &p) >= 0.0
                    && triangle_signed_area(&c, &a, &p) >= 0.0
            });
            if !inside {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return None;
        }
    }
    tris.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    Some(tris)
}

/// Fan triangulation about the centroid when it sees every edge, otherwise ear clipping.
pub fn triangulate(cell: &CellGeometry) -> Result<Vec<[Point; 3]>> {
    if cell.centroid_sees_all_edges() {
        let n = cell.n_vertices();
        return Ok((0..n)
            .map(|i| [cell.centroid, cell.vertices[i], cell.vertices[(i + 1) % n]])
            .collect());
    }
    ear_clip(&cell.vertices).ok_or_else(|| VemError::InvalidMesh("polygon triangulation failed".into()))
}

pub fn polygon_rule(cell: &CellGeometry, degree: usize) -> Result<PolygonRule> {
    let triangles = triangulate(cell)?;
    let tr = triangle_rule(degree);
    let mut points = Vec::with_capacity(triangles.len() * tr.points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for t in &triangles {
        let jac = 2.0 * triangle_signed_area(&t[0], &t[1], &t[2]);
        let e1 = t[1] - t[0];
        let e2 = t[2] - t[0];
        for (&(s, r), &w) in tr.points.iter().zip(&tr.weights) {
            points.push(t[0] + e1 * s + e2 * r);
            weights.push(w * jac);
        }
    }
    Ok(PolygonRule {
        points,
        weights,
        degree,
        triangles,
    })
}

/// `∫_K ξ^a η^b` for the scaled coordinates `ξ = (x - x_K)/h_K`, `η = (y - y_K)/h_K`,
/// stored by total degree: index `d(d+1)/2 + b` for `a + b = d`.
#[derive(Clone, Debug)]
pub struct MonomialMoments {
    pub max_degree: usize,
    pub values: Vec<f64>,
}

pub fn monomial_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

impl MonomialMoments {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        assert!(a + b <= self.max_degree, "moment ({a},{b}) beyond degree {}", self.max_degree);
        self.values[monomial_index(a, b)]
    }
}

/// Moments from the divergence theorem, `∫_K ξ^a η^b = h/(a+1) ∮ ξ^{a+1} η^b n_x`,
/// with exact edge Gauss rules.
pub fn monomial_moments(cell: &CellGeometry, max_degree: usize) -> MonomialMoments {
    let h = cell.diameter;
    let c = cell.centroid;
    let rule = edge_rule(max_degree + 1);
    let n_mom = (max_degree + 1) * (max_degree + 2) / 2;
    let mut values = vec![0.0; n_mom];
    for i in 0..cell.n_vertices() {
        let (p, q) = cell.edge(i);
        let len = (q - p).norm();
        let nx = cell.outward_normal(i).x;
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = p + (q - p) * t;
            let xi = (x.x - c.x) / h;
            let eta = (x.y - c.y) / h;
            for d in 0..=max_degree {
                for b in 0..=d {
                    let a = d - b;
                    values[monomial_index(a, b)] +=
                        w * len * nx * h / (a + 1) as f64 * xi.powi(a as i32 + 1) * eta.powi(b as i32);
                }
            }
        }
    }
    MonomialMoments { max_degree, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> CellGeometry {
        CellGeometry::from_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
    }

    fn pentagon() -> CellGeometry {
        CellGeometry::from_vertices(
            (0..5)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / 5.0 + 0.3;
                    Point::new(0.4 + 0.7 * a.cos(), -0.2 + 0.7 * a.sin())
                })
                .collect(),
        )
    }

    #[test]
    fn edge_rules() {
        let r = edge_rule(1);
        assert_eq!(r.points, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
        let r = edge_rule(3);
        assert_eq!(r.points.len(), 2);
        assert!((r.integrate(|t| t.powi(3)) - 0.25).abs() < 1e-16);
        assert!((edge_rule(5).integrate(|t| t.powi(5)) - 1.0 / 6.0).abs() < 1e-15);
        for d in 0..=21 {
            let r = edge_rule(d);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in 0..=d {
                let exact = 1.0 / (p + 1) as f64;
                assert!((r.integrate(|t| t.powi(p as i32)) - exact).abs() < 1e-14, "d={d} p={p}");
            }
        }
    }

    /// Exact ∫ x^a y^b over a polygon via Green's theorem with a high-order edge rule.
    fn green_oracle(cell: &CellGeometry, a: i32, b: i32) -> f64 {
        let rule = edge_rule((a + b + 1) as usize);
        let mut s = 0.0;
        for i in 0..cell.n_vertices() {
            let (p, q) = cell.edge(i);
            let dy = q.y - p.y;
            s += rule.integrate(|t| {
                let x = p + (q - p) * t;
                x.x.powi(a + 1) * x.y.powi(b) / (a + 1) as f64 * dy
            });
        }
        s
    }

    #[test]
    fn polygon_rule_exact_on_monomials() {
        for cell in [square(), pentagon()] {
            for d in 0..=8 {
                let r = polygon_rule(&cell, d).unwrap();
                assert!((r.weights.iter().sum::<f64>() - cell.area).abs() <= 1e-13 * cell.area);
                for a in 0..=d as i32 {
                    for b in 0..=(d as i32 - a) {
                        let q = r.integrate(|p| p.x.powi(a) * p.y.powi(b));
                        let exact = green_oracle(&cell, a, b);
                        assert!((q - exact).abs() <= 1e-12 * exact.abs().max(1e-2), "d={d} a={a} b={b}");
                    }
                }
            }
        }
    }

    /// Midpoint sums over a fine sub-triangulation.
    fn refinement_oracle<F: Fn(&Point) -> f64>(cell: &CellGeometry, f: F, levels: usize) -> f64 {
        let mut tris: Vec<[Point; 3]> = triangulate(cell).unwrap();
        for _ in 0..levels {
            let mut next = Vec::with_capacity(tris.len() * 4);
            for t in &tris {
                let m01 = nalgebra::center(&t[0], &t[1]);
                let m12 = nalgebra::center(&t[1], &t[2]);
                let m20 = nalgebra::center(&t[2], &t[0]);
                next.push([t[0], m01, m20]);
                next.push([m01, t[1], m12]);
                next.push([m20, m12, t[2]]);
                next.push([m01, m12, m20]);
            }
            tris = next;
        }
        let r2 = triangle_rule(5);
        tris.iter()
            .map(|t| {
                let jac = 2.0 * triangle_signed_area(&t[0], &t[1], &t[2]);
                r2.points
                    .iter()
                    .zip(&r2.weights)
                    .map(|(&(s, r), &w)| w * jac * f(&(t[0] + (t[1] - t[0]) * s + (t[2] - t[0]) * r)))
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn pentagon_x2y2_against_refinement() {
        let cell = pentagon();
        let f = |p: &Point| p.x * p.x * p.y * p.y;
        let q = polygon_rule(&cell, 4).unwrap().integrate(f);
        let oracle = refinement_oracle(&cell, f, 4);
        assert!((q - oracle).abs() < 1e-10);
    }

    #[test]
    fn ear_clipping_on_nonconvex() {
        // L-shape: centroid outside the reentrant corner's view
        let cell = CellGeometry::from_vertices(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 0.2),
            Point::new(0.2, 0.2),
            Point::new(0.2, 2.0),
            Point::new(0.0, 2.0),
        ]);
        assert!(!cell.centroid_sees_all_edges());
        let r = polygon_rule(&cell, 2).unwrap();
        assert!((r.weights.iter().sum::<f64>() - cell.area).abs() < 1e-14);
        let q = r.integrate(|p| p.x * p.y);
        assert!((q - green_oracle(&cell, 1, 1)).abs() < 1e-13);
    }

    #[test]
    fn scaled_moments() {
        let sq = square();
        let m = monomial_moments(&sq, 4);
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(m.get(1, 0).abs() < 1e-15 && m.get(0, 1).abs() < 1e-15);
        assert!((m.get(2, 0) - 1.0 / 24.0).abs() < 1e-15);
        let pent = pentagon();
        let mp = monomial_moments(&pent, 6);
        assert!((mp.get(0, 0) - pent.area).abs() < 1e-14);
        assert!(mp.get(1, 0).abs() < 1e-15 && mp.get(0, 1).abs() < 1e-15);
        let rule = polygon_rule(&pent, 6).unwrap();
        for d in 0..=6 {
            for b in 0..=d {
                let a = d - b;
                let q = rule.integrate(|p| {
                    ((p.x - pent.centroid.x) / pent.diameter).powi(a as i32)
                        * ((p.y - pent.centroid.y) / pent.diameter).powi(b as i32)
                });
                assert!((q - mp.get(a, b)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn moments_translation_invariant() {
        let pent = pentagon();
        let shifted = CellGeometry::from_vertices(pent.vertices.iter().map(|p| p + nalgebra::Vector2::new(13.0, -7.5)).collect());
        let a = monomial_moments(&pent, 5);
        let b = monomial_moments(&shifted, 5);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
