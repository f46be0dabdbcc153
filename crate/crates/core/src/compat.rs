//! Vertex compatibility of the right-hand side.
//!
//! A convex `u` with `u - sum l_i log l_i` smooth up to the boundary has
//! `det D^2 u = 1 / (h prod l_i)` where the value of `h` at every vertex is
//! forced by the two faces meeting there and the values of the others.

use crate::error::{Error, Result};
use crate::field::{Expr, ScalarField};
use crate::geometry::{det2, Polytope};

/// Default relative tolerance of [`check_h`].
pub const DEFAULT_TOL: f64 = 1e-8;
/// Side of the positivity screening grid.
pub const SCREEN_GRID: usize = 64;

/// `1 / (det(n_{k-1}, n_k)^2 prod_{j != k-1, k} l_j(v_k))`.
pub fn required_h_at_vertex(polytope: &Polytope, k: usize) -> f64 {
    let n = polytope.len();
    let k = k % n;
    let prev = (k + n - 1) % n;
    let v = polytope.vertex(k);
    let det = polytope.corner_det(k);
    let prod: f64 = polytope
        .faces()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k && *j != prev)
        .map(|(_, f)| f.eval(&v))
        .product();
    1.0 / (det * det * prod)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexCheck {
    pub vertex: usize,
    pub value: f64,
    pub required: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct CompatReport {
    pub vertices: Vec<VertexCheck>,
    pub tol: f64,
}

impl CompatReport {
    pub fn pass(&self) -> bool {
        self.vertices.iter().all(|v| v.pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.vertices.iter().map(|v| v.deviation).fold(0.0, f64::max)
    }
}

/// Compare `h` with the required vertex values (relative deviation).
pub fn check_h(polytope: &Polytope, h: &ScalarField, tol: f64) -> Result<CompatReport> {
    h.screen(polytope, SCREEN_GRID, true)?;
    let vertices = (0..polytope.len())
        .map(|k| {
            let value = h.eval(&polytope.vertex(k));
            let required = required_h_at_vertex(polytope, k);
            let deviation = ((value - required) / required).abs();
            VertexCheck {
                vertex: k,
                value,
                required,
                deviation,
                pass: deviation <= tol,
            }
        })
        .collect();
    Ok(CompatReport { vertices, tol })
}

/// The `h` for which `u = sum l_i log l_i` solves `det D^2 u = 1 / (h prod l_i)`:
///
/// `1 / h = sum_{i < j} det(n_i, n_j)^2 prod_{q != i, j} l_q`.
pub fn guillemin_h(polytope: &Polytope) -> ScalarField {
    let n = polytope.len();
    let faces = polytope.faces();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = det2(&faces[i].normal, &faces[j].normal);
            let w = d * d;
            if w == 0.0 {
                continue;
            }
            let mut factors = vec![Expr::Const(w)];
            factors.extend((0..n).filter(|&q| q != i && q != j).map(Expr::Face));
            terms.push(Expr::Product(factors));
        }
    }
    let expr = Expr::Div(Box::new(Expr::Const(1.0)), Box::new(Expr::Sum(terms)));
    ScalarField::new("h", expr, Some(polytope)).expect("faces in range")
}

/// `sum_i l_i log l_i`, the model potential with Guillemin boundary behavior.
pub fn guillemin_potential(polytope: &Polytope, x: &crate::geometry::Vec2) -> f64 {
    polytope
        .faces()
        .iter()
        .map(|f| {
            let l = f.eval(x);
            if l > 0.0 {
                l * l.ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// Hessian of [`guillemin_potential`]: `sum_i n_i n_i^T / l_i`.
pub fn guillemin_hessian(polytope: &Polytope, x: &crate::geometry::Vec2) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for f in polytope.faces() {
        let l = f.eval(x);
        let (a, b) = (f.normal.x, f.normal.y);
        m[0][0] += a * a / l;
        m[0][1] += a * b / l;
        m[1][1] += b * b / l;
    }
    m[1][0] = m[0][1];
    m
}

/// Reject `h` that is not positive and finite on the screening grid.
pub fn screen_h(polytope: &Polytope, h: &ScalarField) -> Result<()> {
    h.screen(polytope, SCREEN_GRID, true).map_err(|e| match e {
        Error::NonPositiveField { at, value, .. } => Error::NonPositiveField {
            name: h.name().to_string(),
            at,
            value,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Polytope {
        Polytope::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn vertex_values_by_hand() {
        let sq = Polytope::unit_square();
        for k in 0..4 {
            assert_eq!(required_h_at_vertex(&sq, k), 1.0);
        }
        let rect = Polytope::rectangle(0.0, 0.0, 2.0, 1.0).unwrap();
        let k = (0..4).find(|&k| rect.vertex(k).norm() < 1e-15).unwrap();
        assert!((required_h_at_vertex(&rect, k) - 0.5).abs() < 1e-12);
        let tri = triangle();
        let k = (0..3)
            .find(|&k| (tri.vertex(k) - Vec2::new(1.0, 0.0)).norm() < 1e-15)
            .unwrap();
        assert!((required_h_at_vertex(&tri, k) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn check_h_examples() {
        let sq = Polytope::unit_square();
        let one = ScalarField::parse("h", "1", Some(&sq)).unwrap();
        assert!(check_h(&sq, &one, 1e-10).unwrap().pass());
        let two = ScalarField::parse("h", "2", Some(&sq)).unwrap();
        let r = check_h(&sq, &two, 1e-10).unwrap();
        assert!(r.vertices.iter().all(|v| !v.pass && (v.deviation - 1.0).abs() < 1e-15));
        let rect = Polytope::rectangle(0.0, 0.0, 2.0, 1.0).unwrap();
        let half = ScalarField::parse("h", "0.5", Some(&rect)).unwrap();
        assert!(check_h(&rect, &half, DEFAULT_TOL).unwrap().pass());
        let bad = ScalarField::parse("h", "x - 0.5", Some(&sq)).unwrap();
        assert!(matches!(check_h(&sq, &bad, 1e-8), Err(Error::NonPositiveField { .. })));
    }

    #[test]
    fn guillemin_h_is_one_on_the_square() {
        let sq = Polytope::unit_square();
        let h = guillemin_h(&sq);
        for (x, y) in [(0.5, 0.5), (0.1, 0.9), (0.0, 0.3), (1.0, 1.0)] {
            assert!((h.eval_xy(x, y) - 1.0).abs() < 1e-14, "{x} {y}");
        }
    }

    #[test]
    fn guillemin_h_passes_vertex_check() {
        let pent = Polytope::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.2),
            Vec2::new(2.5, 1.5),
            Vec2::new(1.0, 2.3),
            Vec2::new(-0.4, 1.2),
        ])
        .unwrap();
        for p in [Polytope::unit_square(), triangle(), Polytope::rectangle(0.0, 0.0, 2.0, 1.0).unwrap(), pent] {
            let h = guillemin_h(&p);
            let r = check_h(&p, &h, 1e-12).unwrap();
            assert!(r.pass(), "{:?}", r.vertices);
        }
    }

    /// Finite-difference Hessian of `sum l log l`, independent of the closed
    /// form. Each term is evaluated about `x` with its affine part removed,
    /// `l (1 + r) log(1 + r) - l r` with `r = d / l`, so that the stencil does
    /// not lose digits to cancellation.
    fn fd_det(p: &Polytope, x: Vec2, step: f64) -> f64 {
        let u = |z: Vec2| -> f64 {
            p.faces()
                .iter()
                .map(|f| {
                    let l = f.eval(&x);
                    let r = f.normal.dot(&(z - x)) / l;
                    l * ((1.0 + r) * r.ln_1p() - r)
                })
                .sum()
        };
        let ex = Vec2::new(step, 0.0);
        let ey = Vec2::new(0.0, step);
        let uxx = (u(x + ex) - 2.0 * u(x) + u(x - ex)) / (step * step);
        let uyy = (u(x + ey) - 2.0 * u(x) + u(x - ey)) / (step * step);
        let uxy = (u(x + ex + ey) - u(x + ex - ey) - u(x - ex + ey) + u(x - ex - ey)) / (4.0 * step * step);
        uxx * uyy - uxy * uxy
    }

    #[test]
    fn guillemin_h_matches_finite_difference_determinant() {
        let tri = triangle();
        let h = guillemin_h(&tri);
        let c = tri.centroid();
        let lhs = h.eval(&c);
        let det = fd_det(&tri, c, 1e-5);
        let rhs = 1.0 / (det * tri.face_product(&c));
        assert!(((lhs - rhs) / rhs).abs() < 1e-6, "{lhs} {rhs}");
    }

    #[test]
    fn guillemin_h_random_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pent = Polytope::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.2),
            Vec2::new(2.5, 1.5),
            Vec2::new(1.0, 2.3),
            Vec2::new(-0.4, 1.2),
        ])
        .unwrap();
        for p in [triangle(), pent] {
            let h = guillemin_h(&p);
            let (lo, hi) = p.bbox();
            let mut count = 0;
            while count < 100 {
                let x = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
                // Keep the finite-difference stencil well inside.
                if p.min_face(&x) < 0.05 {
                    continue;
                }
                count += 1;
                let r = fd_det(&p, x, 1e-5) * h.eval(&x) * p.face_product(&x);
                assert!((r - 1.0).abs() <= 1e-6, "{r} at {x:?}");
            }
        }
    }

    #[test]
    fn vertex_values_invariant_under_rigid_motion() {
        let tri = triangle();
        let moved = tri.transformed(0.7, Vec2::new(3.0, -2.0)).unwrap();
        let a: Vec<f64> = (0..3).map(|k| required_h_at_vertex(&tri, k)).collect();
        let b: Vec<f64> = (0..3).map(|k| required_h_at_vertex(&moved, k)).collect();
        // Same cyclic labeling up to a shift.
        let ok = (0..3).any(|s| (0..3).all(|k| (a[k] - b[(k + s) % 3]).abs() < 1e-12));
        assert!(ok, "{a:?} {b:?}");
    }
}
