//! Scaled monomials up to degree two and the vector polynomial basis of `[P_k]²`.
//!
//! A scalar polynomial is stored as six coefficients over
//! `[1, ξ, η, ξ², ξη, η²]` with `ξ = (x - x_K)/h_K`, `η = (y - y_K)/h_K`.

use nalgebra::{Matrix2, Vector2};

use crate::mesh::{CellGeometry, Point};
use crate::quadrature::MonomialMoments;

pub type Poly = [f64; 6];

pub const EXPONENTS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

pub fn eval(p: &Poly, xi: f64, eta: f64) -> f64 {
    p[0] + p[1] * xi + p[2] * eta + p[3] * xi * xi + p[4] * xi * eta + p[5] * eta * eta
}

pub fn d_xi(p: &Poly) -> Poly {
    [p[1], 2.0 * p[3], p[4], 0.0, 0.0, 0.0]
}

pub fn d_eta(p: &Poly) -> Poly {
    [p[2], p[4], 2.0 * p[5], 0.0, 0.0, 0.0]
}

pub fn scale(p: &Poly, s: f64) -> Poly {
    p.map(|c| c * s)
}

pub fn add(p: &Poly, q: &Poly) -> Poly {
    std::array::from_fn(|i| p[i] + q[i])
}

/// `∫_K p q` from moments of degree up to four.
pub fn integrate_product(p: &Poly, q: &Poly, m: &MonomialMoments) -> f64 {
    let mut s = 0.0;
    for (i, &(a1, b1)) in EXPONENTS.iter().enumerate() {
        if p[i] == 0.0 {
            continue;
        }
        for (j, &(a2, b2)) in EXPONENTS.iter().enumerate() {
            if q[j] != 0.0 {
                s += p[i] * q[j] * m.get(a1 + a2, b1 + b2);
            }
        }
    }
    s
}

pub fn integrate(p: &Poly, m: &MonomialMoments) -> f64 {
    EXPONENTS.iter().zip(p).map(|(&(a, b), &c)| c * m.get(a, b)).sum()
}

/// Local scaled coordinates of a point.
pub fn scaled(geom: &CellGeometry, x: &Point) -> (f64, f64) {
    ((x.x - geom.centroid.x) / geom.diameter, (x.y - geom.centroid.y) / geom.diameter)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VecPoly {
    pub x: Poly,
    pub y: Poly,
}

/// Symmetric gradient in physical coordinates; entries have degree `k - 1`.
#[derive(Clone, Copy, Debug)]
pub struct Strain {
    pub xx: Poly,
    pub yy: Poly,
    pub xy: Poly,
}

impl Strain {
    pub fn at(&self, xi: f64, eta: f64) -> Matrix2<f64> {
        let xy = eval(&self.xy, xi, eta);
        Matrix2::new(eval(&self.xx, xi, eta), xy, xy, eval(&self.yy, xi, eta))
    }

    /// `∫_K ε:η` with `ε:η = xx·xx + yy·yy + 2 xy·xy`.
    pub fn inner(&self, other: &Strain, m: &MonomialMoments) -> f64 {
        integrate_product(&self.xx, &other.xx, m)
            + integrate_product(&self.yy, &other.yy, m)
            + 2.0 * integrate_product(&self.xy, &other.xy, m)
    }
}

impl VecPoly {
    pub fn zero() -> Self {
        VecPoly { x: [0.0; 6], y: [0.0; 6] }
    }

    pub fn eval(&self, xi: f64, eta: f64) -> Vector2<f64> {
        Vector2::new(eval(&self.x, xi, eta), eval(&self.y, xi, eta))
    }

    pub fn eval_at(&self, geom: &CellGeometry, p: &Point) -> Vector2<f64> {
        let (xi, eta) = scaled(geom, p);
        self.eval(xi, eta)
    }

    /// Physical gradient `[[∂x u_x, ∂y u_x], [∂x u_y, ∂y u_y]]`.
    pub fn gradient(&self, h: f64, xi: f64, eta: f64) -> Matrix2<f64> {
        Matrix2::new(
            eval(&d_xi(&self.x), xi, eta),
            eval(&d_eta(&self.x), xi, eta),
            eval(&d_xi(&self.y), xi, eta),
            eval(&d_eta(&self.y), xi, eta),
        ) / h
    }

    pub fn strain(&self, h: f64) -> Strain {
        Strain {
            xx: scale(&d_xi(&self.x), 1.0 / h),
            yy: scale(&d_eta(&self.y), 1.0 / h),
            xy: scale(&add(&d_eta(&self.x), &d_xi(&self.y)), 0.5 / h),
        }
    }

    pub fn divergence(&self, h: f64) -> Poly {
        scale(&add(&d_xi(&self.x), &d_eta(&self.y)), 1.0 / h)
    }

    /// `div ε(p)` (a constant vector for degree two).
    pub fn div_strain(&self, h: f64) -> Vector2<f64> {
        let e = self.strain(h);
        let cx = d_xi(&e.xx)[0] + d_eta(&e.xy)[0];
        let cy = d_xi(&e.xy)[0] + d_eta(&e.yy)[0];
        Vector2::new(cx, cy) / h
    }

    pub fn combine(basis: &[VecPoly], coeffs: &[f64]) -> VecPoly {
        let mut out = VecPoly::zero();
        for (b, &c) in basis.iter().zip(coeffs) {
            for i in 0..6 {
                out.x[i] += c * b.x[i];
                out.y[i] += c * b.y[i];
            }
        }
        out
    }
}

fn mono(i: usize) -> Poly {
    let mut p = [0.0; 6];
    p[i] = 1.0;
    p
}

/// Basis of `[P_k]²` with the three rigid modes first:
/// `(1,0), (0,1), (-η,ξ), (ξ,0), (0,η), (η,ξ)` and, for `k = 2`, the six
/// quadratic coordinate monomials.
pub fn vector_basis(k: usize) -> Vec<VecPoly> {
    let z = [0.0; 6];
    let mut b = vec![
        VecPoly { x: mono(0), y: z },
        VecPoly { x: z, y: mono(0) },
        VecPoly { x: scale(&mono(2), -1.0), y: mono(1) },
        VecPoly { x: mono(1), y: z },
        VecPoly { x: z, y: mono(2) },
        VecPoly { x: mono(2), y: mono(1) },
    ];
    if k >= 2 {
        for i in 3..6 {
            b.push(VecPoly { x: mono(i), y: z });
        }
        for i in 3..6 {
            b.push(VecPoly { x: z, y: mono(i) });
        }
    }
    b
}

pub fn n_vector_basis(k: usize) -> usize {
    (k + 1) * (k + 2)
}

/// Scalar pressure basis `m_1 = 1, m_2 = ξ, m_3 = η` truncated to `P_{k-1}`.
pub fn pressure_basis(k: usize) -> Vec<Poly> {
    (0..k * (k + 1) / 2).map(mono).collect()
}
