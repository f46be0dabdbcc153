//! Dirichlet traces forced on the edges by the Guillemin condition.
//!
//! Along edge `i`, parametrized by arclength `t` from `v_i`, the trace solves
//! `u'' = R(t) = 1 / (h prod_{j != i} l_j)`. Both neighbouring faces vanish
//! linearly at the ends, so `R = H(t) / (t (L - t))` with `H` smooth, and
//!
//! `u(t) = c0 t log t + cL (L - t) log(L - t) + V(t) + a + b t`
//!
//! with `c0 = H(0) / L`, `cL = H(L) / L` and `V` the twice integrated bounded
//! remainder.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{EdgeFrame, Polytope, Vec2};
use crate::quadrature::{Chebyshev, CompositeRule};

pub const DEFAULT_DEGREE: usize = 32;
const PANELS: usize = 16;
const POINTS: usize = 64;
/// Relative slack allowed between `H` at the vertex and its limit along the edge.
const LIMIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub edge: usize,
    pub frame: EdgeFrame,
    pub c0: f64,
    pub cl: f64,
    /// Twice integrated regular part, `V(0) = V'(0) = 0`.
    pub smooth: Chebyshev,
    /// `(b, a)`: the affine part is `a + b t`.
    pub affine: (f64, f64),
    pub alpha: (f64, f64),
    /// `sup |u'' - R|` over interior quadrature nodes.
    pub residual: f64,
    d1: Chebyshev,
    d2: Chebyshev,
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// The edge data `H(t) = t (L - t) R(t)` with the two linear factors divided
/// out analytically.
struct EdgeRhs<'a> {
    frame: EdgeFrame,
    h: &'a ScalarField,
    polytope: &'a Polytope,
    /// Faces other than `i - 1`, `i`, `i + 1`.
    others: Vec<usize>,
    scale: f64,
}

impl<'a> EdgeRhs<'a> {
    fn new(polytope: &'a Polytope, h: &'a ScalarField, i: usize) -> Result<Self> {
        let n = polytope.len();
        let frame = polytope.edge_frame(i)?;
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        let s_prev = polytope.face(prev).normal.dot(&frame.tangent);
        let s_next = -polytope.face(next).normal.dot(&frame.tangent);
        let others = (0..n).filter(|&j| j != prev && j != i && j != next).collect();
        Ok(Self {
            frame,
            h,
            polytope,
            others,
            scale: 1.0 / (s_prev * s_next),
        })
    }

    fn point(&self, t: f64) -> Vec2 {
        self.frame.point(t, 0.0)
    }

    fn big_h(&self, t: f64) -> f64 {
        let x = self.point(t);
        let prod: f64 = self.others.iter().map(|&j| self.polytope.face(j).eval(&x)).product();
        self.scale / (self.h.eval(&x) * prod)
    }
}

/// Solve the edge ODE on edge `i` with `u(v_i) = alpha_i`, `u(v_{i+1}) = alpha_ip1`.
pub fn solve_edge(
    polytope: &Polytope,
    h: &ScalarField,
    i: usize,
    alpha_i: f64,
    alpha_ip1: f64,
    degree: usize,
) -> Result<BoundaryTrace> {
    if degree < 2 {
        return Err(Error::InvalidArgument(format!("trace degree {degree} < 2")));
    }
    let n = polytope.len();
    let rhs = EdgeRhs::new(polytope, h, i)?;
    let len = rhs.frame.length;

    let quad = CompositeRule::new(0.0, len, POINTS, PANELS);
    for &t in &quad.nodes {
        let v = h.eval(&rhs.point(t));
        if !v.is_finite() {
            return Err(Error::NonFiniteField {
                name: h.name().to_string(),
                at: rhs.point(t),
            });
        }
        if v <= 0.0 {
            return Err(Error::NonPositiveField {
                name: h.name().to_string(),
                at: rhs.point(t),
                value: v,
            });
        }
    }

    let h0 = endpoint_limit(&rhs, i, i, |k| len * 10f64.powi(-k))?;
    let hl = endpoint_limit(&rhs, i, (i + 1) % n, |k| len * (1.0 - 10f64.powi(-k)))?;
    Ok(integrate_trace(rhs.frame, h0, hl, |t| rhs.big_h(t), (alpha_i, alpha_ip1), degree))
}

/// Solve `u'' = H(t) / (t (L - t))` on `[0, L]` for a numerator `H` that is
/// smooth up to the ends, without reference to a polytope.
pub fn solve_numerator(
    frame: EdgeFrame,
    big_h: impl Fn(f64) -> f64,
    alpha: (f64, f64),
    degree: usize,
) -> Result<BoundaryTrace> {
    if degree < 2 {
        return Err(Error::InvalidArgument(format!("trace degree {degree} < 2")));
    }
    let (h0, hl) = (big_h(0.0), big_h(frame.length));
    Ok(integrate_trace(frame, h0, hl, big_h, alpha, degree))
}

fn integrate_trace(
    frame: EdgeFrame,
    h0: f64,
    hl: f64,
    big_h: impl Fn(f64) -> f64,
    alpha: (f64, f64),
    degree: usize,
) -> BoundaryTrace {
    let len = frame.length;
    let c0 = h0 / len;
    let cl = hl / len;

    // Bounded remainder R - c0/t - cL/(L-t), written to avoid the 1/t blow-up.
    let g = |t: f64| (big_h(t) - h0 * (len - t) / len - hl * t / len) / (t * (len - t));

    let smooth = Chebyshev::interpolate(0.0, len, degree, |tk| {
        if tk <= 0.0 {
            return 0.0;
        }
        CompositeRule::new(0.0, tk, POINTS, PANELS).integrate(|s| (tk - s) * g(s))
    });
    let d1 = smooth.derivative();
    let d2 = d1.derivative();

    let a = alpha.0 - cl * xlogx(len);
    let b = (alpha.1 - c0 * xlogx(len) - smooth.eval(len) - a) / len;

    let residual = CompositeRule::new(0.0, len, POINTS, PANELS)
        .nodes
        .iter()
        .map(|&t| (d2.eval(t) - g(t)).abs())
        .fold(0.0, f64::max);

    BoundaryTrace {
        edge: frame.index,
        frame,
        c0,
        cl,
        smooth,
        affine: (b, a),
        alpha,
        residual,
        d1,
        d2,
    }
}

/// `H` at the vertex, checked against its values approaching the vertex along
/// the edge.
fn endpoint_limit(rhs: &EdgeRhs, edge: usize, vertex: usize, approach: impl Fn(i32) -> f64) -> Result<f64> {
    let at = rhs.polytope.vertex(vertex);
    let t_vertex = if vertex == edge { 0.0 } else { rhs.frame.length };
    let value = rhs.big_h(t_vertex);
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::IncompatibleData {
            edge,
            vertex,
            detail: format!("edge numerator is {value} at ({}, {})", at.x, at.y),
        });
    }
    let dev = |k: i32| ((rhs.big_h(approach(k)) - value) / value).abs();
    let (far, near) = (dev(4), dev(10));
    if !(near <= LIMIT_TOL && near <= far.max(LIMIT_TOL)) {
        return Err(Error::IncompatibleData {
            edge,
            vertex,
            detail: format!("edge numerator does not converge at the vertex (relative gap {near:.3e})"),
        });
    }
    Ok(value)
}

impl BoundaryTrace {
    pub fn length(&self) -> f64 {
        self.frame.length
    }

    /// Value (`order = 0`) or derivative of the trace at `t`.
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        eval_trace(self, t, order)
    }
}

pub fn eval_trace(trace: &BoundaryTrace, t: f64, order: u8) -> Result<f64> {
    let len = trace.length();
    let slack = 1e-14 * len;
    if !(t >= -slack && t <= len + slack) || !t.is_finite() {
        return Err(Error::ParameterOutOfRange { t, len });
    }
    let t = t.clamp(0.0, len);
    let (b, a) = trace.affine;
    match order {
        0 => {
            if t == 0.0 {
                return Ok(trace.alpha.0);
            }
            if t == len {
                return Ok(trace.alpha.1);
            }
            Ok(trace.c0 * xlogx(t) + trace.cl * xlogx(len - t) + trace.smooth.eval(t) + a + b * t)
        }
        1 | 2 if t == 0.0 || t == len => Err(Error::EndpointDerivative { order, t }),
        1 => Ok(trace.c0 * (t.ln() + 1.0) - trace.cl * ((len - t).ln() + 1.0) + trace.d1.eval(t) + b),
        2 => Ok(trace.c0 / t + trace.cl / (len - t) + trace.d2.eval(t)),
        _ => Err(Error::InvalidArgument(format!("derivative order {order} > 2"))),
    }
}

/// Solve every edge; `alpha[k]` is the value at vertex `k`.
pub fn solve_all_edges(polytope: &Polytope, h: &ScalarField, alpha: &[f64], degree: usize) -> Result<Vec<BoundaryTrace>> {
    let n = polytope.len();
    if alpha.len() != n {
        return Err(Error::InvalidArgument(format!(
            "alpha: expected {n}, got {}",
            alpha.len()
        )));
    }
    (0..n)
        .map(|i| solve_edge(polytope, h, i, alpha[i], alpha[(i + 1) % n], degree))
        .collect()
}

/// Dirichlet data on the whole boundary.
#[derive(Clone, Debug)]
pub enum BoundaryData {
    /// Guillemin traces, one per edge.
    Traces(Vec<BoundaryTrace>),
    /// Generic data: restriction of a field to the boundary.
    Field(ScalarField),
}

impl BoundaryData {
    /// Value at parameter `t` along edge `i`.
    pub fn value(&self, polytope: &Polytope, i: usize, t: f64) -> Result<f64> {
        match self {
            BoundaryData::Traces(traces) => eval_trace(&traces[i], t, 0),
            BoundaryData::Field(g) => {
                let frame = polytope.edge_frame(i)?;
                Ok(g.eval(&frame.point(t, 0.0)))
            }
        }
    }

    /// Value at a boundary point, located on the nearest edge.
    pub fn value_at(&self, polytope: &Polytope, x: &Vec2) -> Result<f64> {
        let mut best = (0, 0.0, f64::INFINITY);
        for frame in polytope.edge_frames() {
            let (t, s) = frame.coords(x);
            let tc = t.clamp(0.0, frame.length);
            let d = s.abs() + (t - tc).abs();
            if d < best.2 {
                best = (frame.index, tc, d);
            }
        }
        self.value(polytope, best.0, best.1)
    }
}

/// Sample rows `(edge, t, value, d2value)` at `samples - 1` interior points per edge.
pub fn trace_rows(traces: &[BoundaryTrace], samples: usize) -> Result<Vec<[f64; 4]>> {
    let mut rows = Vec::new();
    for tr in traces {
        for k in 1..samples {
            let t = tr.length() * k as f64 / samples as f64;
            rows.push([tr.edge as f64, t, eval_trace(tr, t, 0)?, eval_trace(tr, t, 2)?]);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::{guillemin_h, guillemin_potential};

    fn square_bottom() -> (Polytope, usize) {
        let sq = Polytope::unit_square();
        let i = (0..4)
            .find(|&i| {
                let f = sq.edge_frame(i).unwrap();
                f.origin.norm() < 1e-15 && (f.tangent - Vec2::new(1.0, 0.0)).norm() < 1e-15
            })
            .unwrap();
        (sq, i)
    }

    #[test]
    fn square_edge_matches_closed_form() {
        let (sq, i) = square_bottom();
        let h = ScalarField::constant("h", 1.0);
        let tr = solve_edge(&sq, &h, i, 0.0, 0.0, DEFAULT_DEGREE).unwrap();
        assert!((tr.c0 - 1.0).abs() < 1e-14 && (tr.cl - 1.0).abs() < 1e-14);
        for k in 1..1000 {
            let t = k as f64 / 1000.0;
            let exact = xlogx(t) + xlogx(1.0 - t);
            assert!((tr.eval(t, 0).unwrap() - exact).abs() < 1e-9);
        }
        assert!((tr.eval(0.5, 0).unwrap() + 2f64.ln()).abs() < 1e-12);
        assert!((tr.eval(0.5, 2).unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(tr.eval(0.0, 0).unwrap(), 0.0);
        assert!(matches!(tr.eval(0.0, 1), Err(Error::EndpointDerivative { .. })));
        assert!(matches!(tr.eval(1.0, 2), Err(Error::EndpointDerivative { .. })));
        assert!(tr.residual < 1e-8);
    }

    #[test]
    fn regular_rhs_has_no_singular_part() {
        let (sq, i) = square_bottom();
        let frame = sq.edge_frame(i).unwrap();
        let tr = solve_numerator(frame, |t| t * (1.0 - t), (0.0, 0.0), DEFAULT_DEGREE).unwrap();
        assert_eq!((tr.c0, tr.cl), (0.0, 0.0));
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!((tr.eval(t, 0).unwrap() - 0.5 * (t * t - t)).abs() < 1e-14);
        }
        assert!(tr.residual < 1e-9);
    }

    #[test]
    fn h_blowing_up_at_a_vertex_is_incompatible() {
        let (sq, i) = square_bottom();
        let h = ScalarField::parse("h", "1 / (x * (1 - x))", Some(&sq)).unwrap();
        assert!(matches!(
            solve_edge(&sq, &h, i, 0.0, 0.0, DEFAULT_DEGREE),
            Err(Error::IncompatibleData { .. }) | Err(Error::NonFiniteField { .. })
        ));
    }

    #[test]
    fn rectangle_trace_matches_guillemin_potential() {
        let rect = Polytope::rectangle(0.0, 0.0, 2.0, 1.0).unwrap();
        let h = guillemin_h(&rect);
        let alpha: Vec<f64> = (0..4).map(|k| guillemin_potential(&rect, &rect.vertex(k))).collect();
        let traces = solve_all_edges(&rect, &h, &alpha, DEFAULT_DEGREE).unwrap();
        for tr in &traces {
            assert!(tr.residual < 1e-8, "residual {}", tr.residual);
            for k in 0..=200 {
                let t = tr.length() * k as f64 / 200.0;
                let exact = guillemin_potential(&rect, &tr.frame.point(t, 0.0));
                let got = tr.eval(t, 0).unwrap();
                assert!((got - exact).abs() < 1e-8, "edge {} t {t}: {got} vs {exact}", tr.edge);
            }
        }
    }

    #[test]
    fn pentagon_traces_convex_and_continuous() {
        let pent = Polytope::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.2),
            Vec2::new(2.5, 1.5),
            Vec2::new(1.0, 2.3),
            Vec2::new(-0.4, 1.2),
        ])
        .unwrap();
        let h = guillemin_h(&pent);
        let alpha = [0.3, -0.2, 0.5, 1.0, 0.0];
        let traces = solve_all_edges(&pent, &h, &alpha, DEFAULT_DEGREE).unwrap();
        let bd = BoundaryData::Traces(traces.clone());
        for (i, tr) in traces.iter().enumerate() {
            assert!(tr.residual < 1e-8, "edge {i}: {}", tr.residual);
            let quad = CompositeRule::new(0.0, tr.length(), 8, 16);
            for &t in &quad.nodes {
                assert!(tr.eval(t, 2).unwrap() > 0.0);
            }
            // Continuity at the vertices, approached from both sides.
            let near_start = tr.eval(1e-10 * tr.length(), 0).unwrap();
            let near_end = tr.eval(tr.length() * (1.0 - 1e-10), 0).unwrap();
            assert!((near_start - alpha[i]).abs() < 1e-8);
            assert!((near_end - alpha[(i + 1) % 5]).abs() < 1e-8);
            let v = pent.vertex(i);
            assert!((bd.value_at(&pent, &v).unwrap() - alpha[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_shift_of_endpoint_values() {
        let tri = Polytope::from_vertices(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let h = guillemin_h(&tri);
        let a = solve_edge(&tri, &h, 1, 0.0, 0.0, DEFAULT_DEGREE).unwrap();
        let b = solve_edge(&tri, &h, 1, 0.7, -1.1, DEFAULT_DEGREE).unwrap();
        let len = a.length();
        for k in 0..=50 {
            let t = len * k as f64 / 50.0;
            let shift = 0.7 + (-1.1 - 0.7) * t / len;
            let d = b.eval(t, 0).unwrap() - a.eval(t, 0).unwrap();
            assert!((d - shift).abs() < 1e-13, "{t}: {d} vs {shift}");
        }
    }

    #[test]
    fn rejects_nonpositive_h_and_bad_parameters() {
        let (sq, i) = square_bottom();
        let h = ScalarField::parse("h", "x - 0.5", Some(&sq)).unwrap();
        assert!(matches!(
            solve_edge(&sq, &h, i, 0.0, 0.0, DEFAULT_DEGREE),
            Err(Error::NonPositiveField { .. })
        ));
        let one = ScalarField::constant("h", 1.0);
        let tr = solve_edge(&sq, &one, i, 0.0, 0.0, DEFAULT_DEGREE).unwrap();
        assert!(matches!(tr.eval(1.5, 0), Err(Error::ParameterOutOfRange { .. })));
        assert!(matches!(tr.eval(0.5, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn oscillating_h_is_incompatible() {
        let (sq, i) = square_bottom();
        // h oscillates without limit towards (0, 0) along y = 0.
        let h = ScalarField::parse("h", "1.5 + sin(1 / (x + 1e-300))", Some(&sq)).unwrap();
        match solve_edge(&sq, &h, i, 0.0, 0.0, DEFAULT_DEGREE) {
            Err(Error::IncompatibleData { vertex, .. }) => assert_eq!(vertex, i),
            other => panic!("{other:?}"),
        }
    }
}
