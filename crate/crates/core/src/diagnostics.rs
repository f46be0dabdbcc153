//! Barrier concavity, boundary Hölder seminorms, and the sub/supersolution
//! envelopes of the model problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{HalfPlane, Polytope, Vec2};
use crate::legendre::PLTGrid;
use crate::ma::DiscreteConvexFn;

/// Parameters sampled per segment.
pub const SAMPLES_PER_SEGMENT: usize = 32;

/// Second derivative in `t` of `(prod l_i(x0 + t (x1 - x0)))^alpha`, from
/// `phi_tt = alpha phi (alpha S1^2 - S2)` with `S_k = sum (b_i / (a_i + b_i t))^k`.
pub fn restricted_phi_tt(faces: &[HalfPlane], alpha: f64, x0: &Vec2, x1: &Vec2, t: f64) -> f64 {
    let (mut s1, mut s2, mut prod) = (0.0, 0.0, 1.0);
    for f in faces {
        let a = f.eval(x0);
        let b = f.normal.dot(&(x1 - x0));
        let l = a + b * t;
        prod *= l;
        s1 += b / l;
        s2 += (b / l) * (b / l);
    }
    let phi = prod.powf(alpha);
    alpha * phi * (alpha * s1 * s1 - s2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcavityReport {
    pub alpha: f64,
    pub segments: usize,
    pub max_phi_tt: f64,
    /// Segment and parameter attaining the maximum.
    pub worst: (Vec2, Vec2, f64),
}

impl ConcavityReport {
    pub fn strictly_concave(&self) -> bool {
        self.max_phi_tt < 0.0
    }
}

/// Random interior segment: two uniform points of `P` (by rejection from the
/// bounding box), shrunk 1% towards their midpoint.
pub fn random_segment(p: &Polytope, rng: &mut impl Rng) -> Result<(Vec2, Vec2)> {
    let (lo, hi) = p.bbox();
    let mut draw = || {
        for _ in 0..10_000 {
            let x = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if p.min_face(&x) > 0.0 {
                return Ok(x);
            }
        }
        Err(Error::SegmentSampling("no interior point in 10000 draws".into()))
    };
    let (a, b) = (draw()?, draw()?);
    let mid = (a + b) * 0.5;
    Ok((mid + (a - mid) * 0.99, mid + (b - mid) * 0.99))
}

pub fn barrier_concavity(p: &Polytope, alpha: f64, trials: usize, seed: u64) -> Result<ConcavityReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ConcavityReport {
        alpha,
        segments: trials,
        max_phi_tt: f64::NEG_INFINITY,
        worst: (Vec2::zeros(), Vec2::zeros(), 0.0),
    };
    for _ in 0..trials {
        let (x0, x1) = random_segment(p, &mut rng)?;
        for k in 0..SAMPLES_PER_SEGMENT {
            let t = k as f64 / (SAMPLES_PER_SEGMENT - 1) as f64;
            let v = restricted_phi_tt(p.faces(), alpha, &x0, &x1, t);
            if v > rep.max_phi_tt {
                rep.max_phi_tt = v;
                rep.worst = (x0, x1, t);
            }
        }
    }
    Ok(rep)
}

/// `alpha_test` default: just inside the guaranteed range `2/(N+1)`.
pub fn default_alpha_test(n_faces: usize) -> f64 {
    if n_faces == 4 {
        0.39
    } else {
        0.9 * 2.0 / (n_faces as f64 + 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub alpha: f64,
    pub seminorm: f64,
    /// Interior node and boundary node attaining the supremum.
    pub witness: (usize, usize),
    pub pairs: usize,
}

/// `sup |u(x) - u(x0)| / |x - x0|^alpha` over interior nodes within `band` of
/// the boundary, `x0` the nearest boundary node.
pub fn holder_exponent(u: &DiscreteConvexFn, alpha: f64, band: f64) -> Result<HolderReport> {
    let nodes = &u.nodes;
    let boundary: Vec<usize> = nodes.boundary_nodes().collect();
    if boundary.is_empty() {
        return Err(Error::InvalidArgument("no boundary nodes".into()));
    }
    let mut rep = HolderReport {
        alpha,
        seminorm: 0.0,
        witness: (0, boundary[0]),
        pairs: 0,
    };
    for i in 0..nodes.n_interior {
        let x = nodes.points[i];
        if nodes.polytope.min_face(&x) > band {
            continue;
        }
        let (b, d2) = boundary
            .iter()
            .map(|&b| (b, (nodes.points[b] - x).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        rep.pairs += 1;
        let q = (u.values[i] - u.values[b]).abs() / d2.sqrt().powf(alpha);
        if q > rep.seminorm {
            rep.seminorm = q;
            rep.witness = (i, b);
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeWitness {
    pub p: f64,
    pub y: f64,
    /// Boundary point whose barrier is violated.
    pub p0: f64,
    /// `u - v+` (upper) or `v- - u` (lower), positive on violation.
    pub excess: f64,
    pub upper: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    /// `sup |g''|` on the flat boundary.
    pub a: f64,
    pub b: f64,
    /// Largest `C` (resp. `C'`) over the sampled boundary points.
    pub c: f64,
    pub c_lower: f64,
    pub contained: bool,
    pub witness: Option<EnvelopeWitness>,
    /// Smallest `D` with `|u(p0, y) - g(p0)| <= D |y log y|` for `0 < y <= 1/2`.
    pub d: f64,
    pub p0: Vec<f64>,
}

/// Builds `v± = P±_{p0}(p) ∓ B y log y ± C y ± delta` at 16 points of the flat
/// boundary with `B = 2A` and checks `v- <= u <= v+` at every node.
pub fn envelope_check(u: &PLTGrid, g: &ScalarField) -> Result<EnvelopeReport> {
    envelope_check_with(u, g, 16)
}

pub fn envelope_check_with(u: &PLTGrid, g: &ScalarField, samples: usize) -> Result<EnvelopeReport> {
    let (np, ny) = (u.ps.len(), u.ys.len());
    if np < samples + 2 || ny < 3 || u.ys[0] != 0.0 {
        return Err(Error::GridTooCoarse(format!(
            "{np} x {ny} grid for {samples} boundary points (needs a y = 0 row)"
        )));
    }
    let (p_lo, p_hi) = (u.ps[0], u.ps[np - 1]);
    let g0 = |p: f64| g.eval_xy(p, 0.0);
    // sup |g''| by second differences on a refined sample of the flat boundary.
    let m = 8 * np;
    let hs = (p_hi - p_lo) / m as f64;
    let a = (1..m)
        .map(|k| {
            let p = p_lo + k as f64 * hs;
            ((g0(p + hs) - 2.0 * g0(p) + g0(p - hs)) / (hs * hs)).abs()
        })
        .fold(0.0, f64::max);
    let b = 2.0 * a;
    let scale = u.values.iter().fold(0.0f64, |s, v| s.max(v.abs())) + 1.0;
    let delta = 1e-8 * scale;
    let xlogx = |y: f64| if y > 0.0 { y * y.ln() } else { 0.0 };

    let mut rep = EnvelopeReport {
        a,
        b,
        c: 0.0,
        c_lower: 0.0,
        contained: true,
        witness: None,
        d: 0.0,
        p0: Vec::with_capacity(samples),
    };
    let on_boundary = |i: usize, j: usize| i == 0 || i == np - 1 || j == ny - 1;
    for s in 1..=samples {
        let k = ((s as f64) * (np - 1) as f64 / (samples + 1) as f64).round() as usize;
        let p0 = u.ps[k];
        rep.p0.push(p0);
        let slope = (g0(p0 + 1e-5) - g0(p0 - 1e-5)) / 2e-5;
        let tangent = |p: f64| g0(p0) + slope * (p - p0);
        let upper = |p: f64| tangent(p) + 0.5 * a * (p - p0) * (p - p0);
        let lower = |p: f64| tangent(p) - 0.5 * a * (p - p0) * (p - p0);
        // C, C' so that the barriers dominate g on the rest of the boundary.
        let (mut c, mut cl) = (0.0f64, 0.0f64);
        for j in 1..ny {
            let y = u.ys[j];
            for i in 0..np {
                if !on_boundary(i, j) {
                    continue;
                }
                let gv = g.eval_xy(u.ps[i], y);
                c = c.max((gv - upper(u.ps[i]) + b * xlogx(y)) / y);
                cl = cl.max((lower(u.ps[i]) + b * xlogx(y) - gv) / y);
            }
        }
        rep.c = rep.c.max(c);
        rep.c_lower = rep.c_lower.max(cl);
        for j in 0..ny {
            let y = u.ys[j];
            for i in 0..np {
                let p = u.ps[i];
                let v = u.at(i, j);
                let vp = upper(p) - b * xlogx(y) + c * y + delta;
                let vm = lower(p) + b * xlogx(y) - cl * y - delta;
                for (excess, up) in [(v - vp, true), (vm - v, false)] {
                    if excess > 0.0 {
                        rep.contained = false;
                        if rep.witness.as_ref().map_or(true, |w| excess > w.excess) {
                            rep.witness = Some(EnvelopeWitness {
                                p,
                                y,
                                p0,
                                excess,
                                upper: up,
                            });
                        }
                    }
                }
            }
        }
        for j in 1..ny {
            let y = u.ys[j];
            if y > 0.5 {
                break;
            }
            rep.d = rep.d.max((u.at(k, j) - g0(p0)).abs() / xlogx(y).abs());
        }
    }
    Ok(rep)
}
