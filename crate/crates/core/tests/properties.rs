use guillemin_core::compat::required_h_at_vertex;
use guillemin_core::edge_ode::{eval_trace, solve_all_edges};
use guillemin_core::expansion::fit_expansion;
use guillemin_core::geometry::BuildOptions;
use guillemin_core::legendre::{involution_error, PLTGrid, Provenance, RowSamples};
use guillemin_core::{Polytope, ScalarField, Vec2};
use proptest::prelude::*;

/// Convex polygon with vertices at sorted angles on an ellipse.
fn polygon() -> impl Strategy<Value = Polytope> {
    (3usize..8, 0.5f64..2.0, any::<u64>()).prop_filter_map("degenerate", |(n, ecc, seed)| {
        let mut angles: Vec<f64> = (0..n)
            .map(|k| {
                let jitter = ((seed.rotate_left(7 * k as u32) % 1000) as f64 / 1000.0 - 0.5) * 0.6;
                std::f64::consts::TAU * (k as f64 + jitter) / n as f64
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<Vec2> = angles.iter().map(|a| Vec2::new(ecc * a.cos(), a.sin())).collect();
        Polytope::from_vertices(&pts).ok()
    })
}

fn xlogx(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotating_the_face_list_relabels_vertices(p in polygon(), shift in 0usize..8) {
        let n = p.len();
        let k = shift % n;
        let faces: Vec<(Vec2, f64)> = (0..n)
            .map(|i| {
                let f = p.face((i + k) % n);
                (f.normal, f.offset)
            })
            .collect();
        let q = Polytope::new(&faces, BuildOptions::default()).unwrap();
        for i in 0..n {
            prop_assert!((q.vertex(i) - p.vertex((i + k) % n)).norm() < 1e-12);
            let (a, b) = (required_h_at_vertex(&q, i), required_h_at_vertex(&p, (i + k) % n));
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn euclidean_motions_preserve_area_and_vertex_values(
        p in polygon(), angle in -3.0f64..3.0, sx in -5.0f64..5.0, sy in -5.0f64..5.0,
    ) {
        let q = p.transformed(angle, Vec2::new(sx, sy)).unwrap();
        prop_assert!((q.area() - p.area()).abs() < 1e-10 * p.area());
        for i in 0..p.len() {
            let (a, b) = (required_h_at_vertex(&q, i), required_h_at_vertex(&p, i));
            prop_assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn square_traces_are_convex(alpha in prop::array::uniform4(-1.0f64..1.0)) {
        let sq = Polytope::unit_square();
        let h = ScalarField::constant("h", 1.0);
        for tr in solve_all_edges(&sq, &h, &alpha, 24).unwrap() {
            for k in 1..32 {
                let t = tr.length() * k as f64 / 32.0;
                prop_assert!(eval_trace(&tr, t, 2).unwrap() > 0.0);
            }
            // Vertex values are attained.
            let i = tr.edge;
            prop_assert!((eval_trace(&tr, 0.0, 0).unwrap() - alpha[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn double_transform_is_identity(a in 0.5f64..3.0, b in -1.0f64..1.0, c in 0.2f64..2.0) {
        // u = a x^2/2 + b x y + c x^4/12 + y log y: convex in x on every row.
        let xs: Vec<f64> = (0..=80).map(|i| -1.0 + 2.0 * i as f64 / 80.0).collect();
        let ys: Vec<f64> = (0..=10).map(|j| 0.1 * j as f64 / 10.0).collect();
        let rows = RowSamples::from_fn(xs, ys, |x, y| a * x * x / 2.0 + b * x * y + c * x.powi(4) / 12.0 + xlogx(y));
        prop_assert!(involution_error(&rows).unwrap() < 1e-5);
    }

    #[test]
    fn fit_recovers_basis_combinations(
        u0 in -2.0f64..2.0,
        hat1 in -2.0f64..2.0, u1 in -2.0f64..2.0, hat2 in -2.0f64..2.0, u2 in -2.0f64..2.0,
    ) {
        let ps = vec![-0.5, 0.0, 0.5];
        let ys: Vec<f64> = (0..=40).map(|j| 0.1 * (j as f64 / 40.0).powi(2)).collect();
        let mut values = Vec::new();
        for &y in &ys {
            for _ in &ps {
                values.push(u0 + hat1 * xlogx(y) + u1 * y + (hat2 * xlogx(y) * y + u2 * y * y) / 2.0);
            }
        }
        let grid = PLTGrid { ps, ys, values, provenance: Provenance::Transformed };
        let fit = fit_expansion(&grid, 2, (1e-3, 0.1)).unwrap();
        for col in 0..3 {
            let want = [hat1, u1, hat2, u2];
            let got = [fit.hat(1, col), fit.plain(1, col), fit.hat(2, col), fit.plain(2, col)];
            for (g, w) in got.iter().zip(want) {
                prop_assert!((g - w).abs() < 1e-7, "{got:?} vs {want:?}");
            }
        }
    }
}
