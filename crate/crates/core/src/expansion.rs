//! Boundary expansion of `u*` in `y^i log y` and `y^i`, the log-coefficient
//! identities, and the smooth part `f = u - c y log y` of a solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Polytope;
use crate::legendre::{sample_near_edge, EdgeWindow, PLTGrid, RowSamples};
use crate::ma::DiscreteConvexFn;

/// Normal-equation condition number beyond which a fit is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// `u*(p, y) = u*(p, 0) + sum_i (1/i!) (uhat_i y^i log y + u_i y^i)`, fitted
/// per `p` column over `y in [y_lo, y_hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionFit {
    pub ps: Vec<f64>,
    pub order: usize,
    pub window: (f64, f64),
    /// `u*(p, 0)`: the grid's `y = 0` row when it has one, else fitted.
    pub boundary: Vec<f64>,
    /// Per column `[uhat_1, u_1, uhat_2, u_2, ...]`, already multiplied by `i!`.
    pub coeffs: Vec<Vec<f64>>,
    /// Largest absolute residual over the window rows.
    pub residual: Vec<f64>,
    pub condition: f64,
}

impl ExpansionFit {
    /// Coefficient of `y^i log y / i!` in column `col`.
    pub fn hat(&self, i: usize, col: usize) -> f64 {
        self.coeffs[col][2 * (i - 1)]
    }

    /// Coefficient of `y^i / i!` in column `col`.
    pub fn plain(&self, i: usize, col: usize) -> f64 {
        self.coeffs[col][2 * (i - 1) + 1]
    }

    /// `(p, uhat1, u1, ..., residual)` per column.
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        (0..self.ps.len())
            .map(|c| {
                let mut row = vec![self.ps[c]];
                row.extend_from_slice(&self.coeffs[c]);
                row.push(self.residual[c]);
                row
            })
            .collect()
    }

    /// Indices of the columns in the central half of the `p` range.
    pub fn central(&self) -> std::ops::Range<usize> {
        let n = self.ps.len();
        n / 4..n - n / 4
    }
}

/// `[2 * (first positive row), 0.1]`.
pub fn default_window(grid: &PLTGrid) -> (f64, f64) {
    let first = grid.ys.iter().copied().find(|&y| y > 0.0).unwrap_or(0.0);
    (2.0 * first, 0.1)
}

fn factorial(i: usize) -> f64 {
    (1..=i).map(|k| k as f64).product()
}

pub fn fit_expansion(grid: &PLTGrid, order: usize, window: (f64, f64)) -> Result<ExpansionFit> {
    if order == 0 || order > 5 {
        return Err(Error::InvalidArgument(format!("order {order} outside 1..=5")));
    }
    let (y_lo, y_hi) = window;
    if !(y_lo > 0.0 && y_hi > y_lo) {
        return Err(Error::InvalidArgument(format!("bad fit window [{y_lo}, {y_hi}]")));
    }
    let rows: Vec<usize> = (0..grid.ys.len())
        .filter(|&j| grid.ys[j] >= y_lo && grid.ys[j] <= y_hi)
        .collect();
    if rows.len() < 4 * order {
        return Err(Error::GridTooCoarse(format!(
            "{} rows in the fit window, need {}",
            rows.len(),
            4 * order
        )));
    }
    let known_boundary = grid.ys.first() == Some(&0.0);
    let offset = usize::from(!known_boundary);
    let ncol = 2 * order + offset;
    let mut a = DMatrix::zeros(rows.len(), ncol);
    for (r, &j) in rows.iter().enumerate() {
        let y: f64 = grid.ys[j];
        if offset == 1 {
            a[(r, 0)] = 1.0;
        }
        for i in 1..=order {
            let yi = y.powi(i as i32);
            a[(r, offset + 2 * (i - 1))] = yi * y.ln();
            a[(r, offset + 2 * (i - 1) + 1)] = yi;
        }
    }
    // Column equilibration; the basis is nearly collinear on short windows.
    let scale: Vec<f64> = (0..ncol).map(|c| a.column(c).norm()).collect();
    for c in 0..ncol {
        a.column_mut(c).scale_mut(1.0 / scale[c]);
    }
    let svd = a.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = (smax / smin).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond: condition });
    }

    let np = grid.ps.len();
    let mut fit = ExpansionFit {
        ps: grid.ps.clone(),
        order,
        window,
        boundary: Vec::with_capacity(np),
        coeffs: Vec::with_capacity(np),
        residual: Vec::with_capacity(np),
        condition,
    };
    for col in 0..np {
        let u0 = if known_boundary { grid.at(col, 0) } else { 0.0 };
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|&j| grid.at(col, j) - u0));
        let x = svd
            .solve(&b, 0.0)
            .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
        let res = (&a * &x - &b).amax();
        let raw: Vec<f64> = (0..ncol).map(|c| x[c] / scale[c]).collect();
        fit.boundary.push(if known_boundary { u0 } else { raw[0] });
        fit.coeffs.push(
            (0..2 * order)
                .map(|k| raw[offset + k] * factorial(k / 2 + 1))
                .collect(),
        );
        fit.residual.push(res);
    }
    Ok(fit)
}

/// Local coefficient `h(x, 0) = phi / y` along edge `edge` for
/// `phi = h prod l_j`: `x` is the distance from the edge's first vertex.
pub fn edge_h<'a>(polytope: &'a Polytope, h: &'a ScalarField, edge: usize) -> Result<impl Fn(f64) -> f64 + 'a> {
    let frame = polytope.edge_frame(edge)?;
    Ok(move |x: f64| {
        let pt = frame.point(x, 0.0);
        let others: f64 = (0..polytope.len())
            .filter(|&j| j != edge)
            .map(|j| polytope.face(j).eval(&pt))
            .product();
        h.eval(&pt) * others
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogCoefficientReport {
    /// `sup |uhat_1 + 1|` over the central columns.
    pub hat1_dev: f64,
    pub hat2_sup: f64,
    pub hat3_sup: f64,
    /// `sup |uhat_1 + u*_0'' / h(x, 0)|`: holds for any boundary data.
    pub identity_dev: f64,
    /// `sup |uhat_2 + uhat_1'' / h(x, 0)|`.
    pub chain_dev: f64,
    /// Scale of `uhat_1'' / h`, for judging `chain_dev`.
    pub chain_scale: f64,
    pub tol: f64,
}

impl LogCoefficientReport {
    pub fn pass(&self) -> bool {
        self.hat1_dev <= self.tol && self.hat2_sup <= self.tol && self.hat3_sup <= self.tol
    }
}

/// Checks `uhat_1 = -u*_0''/h = -1`, `uhat_2 = uhat_3 = 0` over the central
/// half of the columns; `h` is the local coefficient along the edge.
pub fn verify_log_coefficients(fit: &ExpansionFit, h: impl Fn(f64) -> f64, tol: f64) -> Result<LogCoefficientReport> {
    if fit.order < 3 {
        return Err(Error::InvalidArgument(format!("need a fit of order >= 3, got {}", fit.order)));
    }
    let ps = &fit.ps;
    let n = ps.len();
    if n < 8 {
        return Err(Error::GridTooCoarse(format!("{n} columns")));
    }
    let d2 = |k: usize, f: &dyn Fn(usize) -> f64| {
        let (hm, hp) = (ps[k] - ps[k - 1], ps[k + 1] - ps[k]);
        2.0 * ((f(k + 1) - f(k)) / hp - (f(k) - f(k - 1)) / hm) / (hm + hp)
    };
    let mut rep = LogCoefficientReport {
        hat1_dev: 0.0,
        hat2_sup: 0.0,
        hat3_sup: 0.0,
        identity_dev: 0.0,
        chain_dev: 0.0,
        chain_scale: 0.0,
        tol,
    };
    for k in fit.central() {
        let k = k.clamp(1, n - 2);
        let x = (fit.boundary[k + 1] - fit.boundary[k - 1]) / (ps[k + 1] - ps[k - 1]);
        let hx = h(x);
        let u0pp = d2(k, &|c| fit.boundary[c]);
        let hat1pp = d2(k, &|c| fit.hat(1, c));
        rep.hat1_dev = rep.hat1_dev.max((fit.hat(1, k) + 1.0).abs());
        rep.hat2_sup = rep.hat2_sup.max(fit.hat(2, k).abs());
        rep.hat3_sup = rep.hat3_sup.max(fit.hat(3, k).abs());
        rep.identity_dev = rep.identity_dev.max((fit.hat(1, k) + u0pp / hx).abs());
        rep.chain_dev = rep.chain_dev.max((fit.hat(2, k) + hat1pp / hx).abs());
        rep.chain_scale = rep.chain_scale.max((hat1pp / hx).abs());
    }
    Ok(rep)
}

/// Finite-difference sizes of `f = u - c y log y` on one band `y in [lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothBand {
    pub lo: f64,
    pub hi: f64,
    pub f_sup: f64,
    pub grad_sup: f64,
    pub hess_sup: f64,
    /// `sup |u_y|`, which grows like `|log y|` when `c != 0`.
    pub u_y_sup: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothPartReport {
    pub c: f64,
    /// Dyadic bands from the top of the window down towards the edge.
    pub bands: Vec<SmoothBand>,
}

impl SmoothPartReport {
    /// Largest band-to-band growth factor of the second differences of `f`.
    pub fn hess_growth(&self) -> f64 {
        self.bands
            .windows(2)
            .map(|w| w[1].hess_sup / w[0].hess_sup.max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Samples `u` near an edge and reports the smoothness of `u - c y log y`.
/// The window must stay at least its depth away from both vertices.
pub fn smooth_part(u: &DiscreteConvexFn, window: &EdgeWindow, c: f64, bands: usize) -> Result<SmoothPartReport> {
    let len = u.nodes.polytope.edge_frame(window.edge)?.length;
    if window.t0 < window.depth || len - window.t1 < window.depth {
        return Err(Error::WindowAtVertex(format!(
            "[{}, {}] x [0, {}] on an edge of length {len}",
            window.t0, window.t1, window.depth
        )));
    }
    let rows = sample_near_edge(u, window)?;
    smooth_part_rows(&rows, c, bands)
}

/// As [`smooth_part`], on samples in window coordinates.
pub fn smooth_part_rows(rows: &RowSamples, c: f64, bands: usize) -> Result<SmoothPartReport> {
    let (nx, ny) = (rows.xs.len(), rows.ys.len());
    if nx < 3 || ny < 3 {
        return Err(Error::GridTooCoarse(format!("{nx} x {ny} samples")));
    }
    let xlogx = |y: f64| if y > 0.0 { y * y.ln() } else { 0.0 };
    let f = |i: usize, j: usize| rows.at(i, j) - c * xlogx(rows.ys[j]);
    let (xs, ys) = (&rows.xs, &rows.ys);
    let top = ys[ny - 1];
    let mut out = Vec::new();
    for b in 0..bands {
        let hi = top / 2f64.powi(b as i32);
        let lo = hi / 2.0;
        let mut band = SmoothBand {
            lo,
            hi,
            f_sup: 0.0,
            grad_sup: 0.0,
            hess_sup: 0.0,
            u_y_sup: 0.0,
        };
        let mut any = false;
        for j in 1..ny - 1 {
            let y = ys[j];
            if y < lo || y > hi {
                continue;
            }
            any = true;
            let (km, kp) = (y - ys[j - 1], ys[j + 1] - y);
            for i in 1..nx - 1 {
                let (hm, hp) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                let fx = (f(i + 1, j) - f(i - 1, j)) / (hm + hp);
                let fy = (f(i, j + 1) - f(i, j - 1)) / (km + kp);
                let fxx = 2.0 * ((f(i + 1, j) - f(i, j)) / hp - (f(i, j) - f(i - 1, j)) / hm) / (hm + hp);
                let fyy = 2.0 * ((f(i, j + 1) - f(i, j)) / kp - (f(i, j) - f(i, j - 1)) / km) / (km + kp);
                let fxy = (f(i + 1, j + 1) - f(i - 1, j + 1) - f(i + 1, j - 1) + f(i - 1, j - 1))
                    / ((hm + hp) * (km + kp));
                let uy = (rows.at(i, j + 1) - rows.at(i, j - 1)) / (km + kp);
                band.f_sup = band.f_sup.max(f(i, j).abs());
                band.grad_sup = band.grad_sup.max(fx.hypot(fy));
                band.hess_sup = band.hess_sup.max(fxx.abs().max(fyy.abs()).max(fxy.abs()));
                band.u_y_sup = band.u_y_sup.max(uy.abs());
            }
        }
        if !any {
            break;
        }
        out.push(band);
    }
    if out.is_empty() {
        return Err(Error::GridTooCoarse("no interior rows in the window".into()));
    }
    Ok(SmoothPartReport { c, bands: out })
}
