//! Randomised invariants of the building blocks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

use vemcontact::assembly::{CsrMatrix, Material};
use vemcontact::bench::fit_slope;
use vemcontact::contact::GapFunction;
use vemcontact::mesh::{build_hexagonal_mesh, build_web_mesh, read_mesh, write_mesh, CellGeometry, Point, Rect};
use vemcontact::vem::{local_element, StabMode};

/// Convex polygon with vertices at sorted angles on an ellipse.
fn convex_polygon() -> impl Strategy<Value = CellGeometry> {
    (prop::collection::vec(0.0..1.0_f64, 3..9), 0.3..3.0_f64, 0.5..2.0_f64, -5.0..5.0_f64, -5.0..5.0_f64).prop_filter_map(
        "well separated angles",
        |(mut t, r, aspect, cx, cy)| {
            t.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = t.len();
            let gaps_ok = (0..n).all(|i| {
                let next = if i + 1 < n { t[i + 1] } else { t[0] + 1.0 };
                next - t[i] > 0.03 && next - t[i] < 0.45
            });
            gaps_ok.then(|| {
                CellGeometry::from_vertices(
                    t.iter()
                        .map(|s| Point::new(cx + r * aspect * (2.0 * PI * s).cos(), cy + r * (2.0 * PI * s).sin()))
                        .collect(),
                )
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn element_reproduces_polynomials_and_is_symmetric_psd(geom in convex_polygon(), k in 1usize..=2, mu in 0.1..10.0_f64) {
        let el = local_element(0, &geom, k, mu, StabMode::Scaled).unwrap();
        let np = el.basis.len();
        for b in 0..np {
            let mut e = DVector::zeros(np);
            e[b] = 1.0;
            prop_assert!((&el.projector * el.dofs_of(&el.basis[b]) - e).norm() <= 1e-10);
        }
        let a = &el.stiffness;
        prop_assert!((a - a.transpose()).amax() <= 1e-12 * a.amax());
        let eig = SymmetricEigen::new(a.clone());
        let lmax = eig.eigenvalues.max();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10 * lmax));
        prop_assert_eq!(eig.eigenvalues.iter().filter(|l| l.abs() <= 1e-10 * lmax).count(), 3);
    }

    #[test]
    fn csr_is_independent_of_triplet_order(
        entries in prop::collection::vec((0usize..6, 0usize..5, -3.0..3.0_f64), 0..40),
        x in prop::collection::vec(-2.0..2.0_f64, 5),
    ) {
        let a = CsrMatrix::from_triplets(6, 5, entries.clone());
        let mut rev = entries.clone();
        rev.reverse();
        let b = CsrMatrix::from_triplets(6, 5, rev);
        let mut dense = DMatrix::<f64>::zeros(6, 5);
        for &(i, j, v) in &entries {
            dense[(i, j)] += v;
        }
        for i in 0..6 {
            for j in 0..5 {
                prop_assert!((a.get(i, j) - dense[(i, j)]).abs() <= 1e-12);
                prop_assert!((b.get(i, j) - dense[(i, j)]).abs() <= 1e-12);
            }
        }
        let x = DVector::from_vec(x);
        prop_assert!((a.mul_vec(&x) - &dense * &x).amax() <= 1e-12);
        let y = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        prop_assert!((a.tr_mul_vec(&y) - dense.transpose() * &y).amax() <= 1e-12);
        prop_assert!((a.transpose().mul_vec(&y) - dense.transpose() * &y).amax() <= 1e-12);
    }

    #[test]
    fn circular_gap_is_stable_and_symmetric(r in 0.01..10.0_f64, touch in -1.0..1.0_f64, frac in 0.0..0.999_f64) {
        let g = GapFunction::Circular { radius: r, touch };
        let d = frac * r;
        let a = g.at(touch + d).unwrap();
        let b = g.at(touch - d).unwrap();
        prop_assert!(a >= 0.0);
        // the abscissae touch ± d are themselves rounded; the gap slope amplifies that
        let slope = d / (r * r - d * d).sqrt();
        prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * ((touch.abs() + d) * (1.0 + slope) + r));
        prop_assert!((a - (r - (r * r - d * d).sqrt())).abs() <= 1e-12 * r);
        prop_assert!(g.at(touch + 1.01 * r).is_err());
    }

    #[test]
    fn tabulated_gap_mean_is_exact_on_a_segment(
        g in prop::collection::vec(0.0..1.0_f64, 4),
        lo in 0.0..1.0_f64,
        len in 0.0..1.0_f64,
        seg in 0usize..3,
    ) {
        let s = vec![0.0, 1.0, 2.5, 3.0];
        let gap = GapFunction::tabulated(s.clone(), g).unwrap();
        let w = s[seg + 1] - s[seg];
        let a = s[seg] + lo * w;
        let b = a + len * (s[seg + 1] - a);
        let m = gap.mean(a, b).unwrap();
        prop_assert!((m - 0.5 * (gap.at(a).unwrap() + gap.at(b).unwrap())).abs() <= 1e-14);
    }

    #[test]
    fn slope_fit_recovers_power_laws(c in 0.01..100.0_f64, rate in 0.2..4.0_f64, h0 in 0.1..1.0_f64) {
        let h: Vec<f64> = (0..4).map(|i| h0 / 2f64.powi(i)).collect();
        let e: Vec<f64> = h.iter().map(|v| c * v.powf(rate)).collect();
        prop_assert!((fit_slope(&h, &e).unwrap() - rate).abs() <= 1e-10);
    }

    #[test]
    fn plane_strain_material_inverts(e in 0.1..1e5_f64, nu in 0.01..0.4999_f64) {
        let m = Material::from_young(e, nu).unwrap();
        let back_e = m.mu * (3.0 * m.lambda + 2.0 * m.mu) / (m.lambda + m.mu);
        let back_nu = m.lambda / (2.0 * (m.lambda + m.mu));
        prop_assert!((back_e - e).abs() <= 1e-9 * e);
        prop_assert!((back_nu - nu).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mesh_text_round_trip_is_lossless(seed in any::<u64>(), n in 2usize..8, hex in any::<bool>()) {
        let cells = n * n;
        let r = Rect::new(-0.3, 0.1, 0.9, 1.7);
        let m = if hex { build_hexagonal_mesh(&r, cells).unwrap() } else { build_web_mesh(&r, cells, seed).unwrap() };
        let text = write_mesh(&m);
        let back = read_mesh(&text).unwrap();
        prop_assert_eq!(back.vertices(), m.vertices());
        prop_assert_eq!(back.cells(), m.cells());
        prop_assert_eq!(write_mesh(&back), text);
    }
}
