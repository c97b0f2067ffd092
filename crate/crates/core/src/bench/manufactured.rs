use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::Material;
use crate::contact::GapFunction;
use crate::mesh::Point;

type Field<T> = Arc<dyn Fn(&Point) -> T + Send + Sync>;

/// Closed-form solution of a two-body problem on `Ω¹ = (0,1)×(-1,0)` (slave)
/// and `Ω² = (0,1)×(0,1)`, the same formulas on both bodies.
#[derive(Clone)]
pub struct ManufacturedSolution {
    pub name: &'static str,
    pub material: Material,
    pub gap: GapFunction,
    u: Field<Vector2<f64>>,
    grad: Field<Matrix2<f64>>,
    force: Field<Vector2<f64>>,
}

impl std::fmt::Debug for ManufacturedSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedSolution")
            .field("name", &self.name)
            .field("material", &self.material)
            .finish_non_exhaustive()
    }
}

impl ManufacturedSolution {
    pub fn u(&self, x: &Point) -> Vector2<f64> {
        (self.u)(x)
    }

    /// `[[∂x u_x, ∂y u_x], [∂x u_y, ∂y u_y]]`.
    pub fn grad(&self, x: &Point) -> Matrix2<f64> {
        (self.grad)(x)
    }

    pub fn divergence(&self, x: &Point) -> f64 {
        self.grad(x).trace()
    }

    /// `p = λ div u`.
    pub fn pressure(&self, x: &Point) -> f64 {
        self.material.lambda * self.divergence(x)
    }

    pub fn stress(&self, x: &Point) -> Matrix2<f64> {
        let g = self.grad(x);
        (g + g.transpose()) * self.material.mu + Matrix2::identity() * self.pressure(x)
    }

    /// `f = -div σ`.
    pub fn force(&self, x: &Point) -> Vector2<f64> {
        (self.force)(x)
    }

    pub fn traction(&self, x: &Point, n: &Vector2<f64>) -> Vector2<f64> {
        self.stress(x) * n
    }

    /// Largest mismatch, over `n` random points of `(0,1)×(-1,1)`, between the
    /// closed forms and central differences: `grad` against `u`, and `force`
    /// against `-div σ`.
    pub fn consistency_defect(&self, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1e-5;
        let mut worst = 0.0_f64;
        for _ in 0..n {
            let x = Point::new(rng.gen_range(0.05..0.95), rng.gen_range(-0.95..0.95));
            let ex = Vector2::new(d, 0.0);
            let ey = Vector2::new(0.0, d);
            let dux = (self.u(&(x + ex)) - self.u(&(x - ex))) / (2.0 * d);
            let duy = (self.u(&(x + ey)) - self.u(&(x - ey))) / (2.0 * d);
            let g = Matrix2::new(dux.x, duy.x, dux.y, duy.y);
            worst = worst.max((g - self.grad(&x)).amax());
            let dsx = (self.stress(&(x + ex)) - self.stress(&(x - ex))) / (2.0 * d);
            let dsy = (self.stress(&(x + ey)) - self.stress(&(x - ey))) / (2.0 * d);
            let div = Vector2::new(dsx[(0, 0)] + dsy[(0, 1)], dsx[(1, 0)] + dsy[(1, 1)]);
            worst = worst.max((self.force(&x) + div).amax());
        }
        worst
    }
}

/// `u = (0, -(y+1))/λ`, `p = -1`, `μ = 1`, no gap, no load.
pub fn patch_solution(lambda: f64) -> ManufacturedSolution {
    ManufacturedSolution {
        name: "patch",
        material: Material { lambda, mu: 1.0 },
        gap: GapFunction::Zero,
        u: Arc::new(move |x| Vector2::new(0.0, -(x.y + 1.0) / lambda)),
        grad: Arc::new(move |_| Matrix2::new(0.0, 0.0, 0.0, -1.0 / lambda)),
        force: Arc::new(|_| Vector2::zeros()),
    }
}

/// `u = (πx cos πy, -sin πy)`, divergence free, `μ = 1`, no gap.
pub fn trig_solution(lambda: f64) -> ManufacturedSolution {
    ManufacturedSolution {
        name: "trig",
        material: Material { lambda, mu: 1.0 },
        gap: GapFunction::Zero,
        u: Arc::new(|x| Vector2::new(PI * x.x * (PI * x.y).cos(), -(PI * x.y).sin())),
        grad: Arc::new(|x| {
            let (s, c) = (PI * x.y).sin_cos();
            Matrix2::new(PI * c, -PI * PI * x.x * s, 0.0, -PI * c)
        }),
        force: Arc::new(|x| Vector2::new(PI.powi(3) * x.x * (PI * x.y).cos(), -PI * PI * (PI * x.y).sin())),
    }
}
