//! Partial Legendre transform near an edge, and a finite-difference solver for
//! the degenerate model equation `u_pp + y a u_yy + b u_p + c u = f`.
//!
//! Window coordinates: `x` runs along the edge, `y` is the inward distance.
//! After the transform `p = u_x` replaces `x`.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::linalg::{bicgstab, Csr, Ilu0};
use crate::ma::DiscreteConvexFn;

/// Values on a tensor grid, `values[j * xs.len() + i]` at `(xs[i], ys[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSamples {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl RowSamples {
    pub fn from_fn(xs: Vec<f64>, ys: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { xs, ys, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.xs.len() + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.xs.len();
        &self.values[j * n..(j + 1) * n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    Transformed,
    Model { eps: f64 },
}

/// `u*(p, y)` on a tensor grid over `[p0, p1] x [0, Y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PLTGrid {
    pub ps: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl PLTGrid {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.ps.len() + i]
    }

    pub fn as_rows(&self) -> RowSamples {
        RowSamples {
            xs: self.ps.clone(),
            ys: self.ys.clone(),
            values: self.values.clone(),
        }
    }

    /// `(p, y, u*)` in row-major order.
    pub fn csv_rows(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.values.len());
        for (j, &y) in self.ys.iter().enumerate() {
            for (i, &p) in self.ps.iter().enumerate() {
                out.push([p, y, self.at(i, j)]);
            }
        }
        out
    }

    /// Smallest second difference in `p` over rows `y > 0`, and largest second
    /// difference in `y` over columns (rows `y > 0` only). Convex in `p` and
    /// concave in `y` means `(>= 0, <= 0)` up to round-off.
    pub fn shape(&self) -> (f64, f64) {
        let (np, ny) = (self.ps.len(), self.ys.len());
        let mut min_pp = f64::INFINITY;
        let mut max_yy = f64::NEG_INFINITY;
        for j in 0..ny {
            if self.ys[j] <= 0.0 {
                continue;
            }
            for i in 1..np.saturating_sub(1) {
                let d = second_difference(&self.ps, i, |k| self.at(k, j));
                min_pp = min_pp.min(d);
            }
        }
        for j in 1..ny.saturating_sub(1) {
            if self.ys[j - 1] <= 0.0 {
                continue;
            }
            for i in 0..np {
                let d = second_difference(&self.ys, j, |k| self.at(i, k));
                max_yy = max_yy.max(d);
            }
        }
        (min_pp, max_yy)
    }

    /// `u*_p` at grid nodes: centred differences inside, one-sided at the ends.
    pub fn p_derivative(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        let np = self.ps.len();
        for j in 0..self.ys.len() {
            let row = &self.values[j * np..(j + 1) * np];
            out[j * np..(j + 1) * np].copy_from_slice(&derivative(&self.ps, row));
        }
        out
    }
}

/// Edge-aligned window: `x` in `[t0, t1]` along edge `edge`, `y` in `[0, depth]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeWindow {
    pub edge: usize,
    pub t0: f64,
    pub t1: f64,
    pub depth: f64,
}

/// Reads a discrete solution on the tensor lines parallel to an edge. The edge
/// must be parallel to a coordinate axis so that grid lines are rows.
pub fn sample_near_edge(u: &DiscreteConvexFn, window: &EdgeWindow) -> Result<RowSamples> {
    let nodes = &u.nodes;
    let frame = nodes.polytope.edge_frame(window.edge)?;
    if frame.tangent.x.abs().min(frame.tangent.y.abs()) > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "edge {} is not parallel to a grid axis",
            window.edge
        )));
    }
    if !(window.t0 < window.t1 && window.depth > 0.0) {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let tol = 1e-12 * nodes.polytope.diameter();
    let tg = &nodes.tensor;
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    for j in 0..tg.ys.len() {
        for i in 0..tg.xs.len() {
            if let Some(k) = tg.at(i, j) {
                let (t, s) = frame.coords(&nodes.points[k]);
                if t >= window.t0 - tol && t <= window.t1 + tol && s >= -tol && s <= window.depth + tol {
                    pts.push((t, s.max(0.0), u.values[k]));
                }
            }
        }
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup_by(|a, b| (*a - *b).abs() <= tol);
    }
    if xs.len() < 3 || ys.len() < 3 {
        return Err(Error::GridTooCoarse(format!(
            "window holds {} x {} grid lines",
            xs.len(),
            ys.len()
        )));
    }
    let nx = xs.len();
    let mut values = vec![f64::NAN; nx * ys.len()];
    for (t, s, v) in pts {
        let i = xs.partition_point(|&x| x < t - tol);
        let j = ys.partition_point(|&y| y < s - tol);
        values[j * nx + i] = v;
    }
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(format!(
            "window is not a full tensor block: missing ({}, {})",
            xs[k % nx],
            ys[k / nx]
        )));
    }
    Ok(RowSamples { xs, ys, values })
}

/// Three-point second difference on a possibly nonuniform grid.
fn second_difference(xs: &[f64], k: usize, f: impl Fn(usize) -> f64) -> f64 {
    let (hm, hp) = (xs[k] - xs[k - 1], xs[k + 1] - xs[k]);
    2.0 * ((f(k + 1) - f(k)) / hp - (f(k) - f(k - 1)) / hm) / (hm + hp)
}

/// Second-order first derivative at every node of a nonuniform grid.
fn derivative(xs: &[f64], u: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (hm, hp) = (xs[k] - xs[k - 1], xs[k + 1] - xs[k]);
        d[k] = (hm * hm * (u[k + 1] - u[k]) + hp * hp * (u[k] - u[k - 1])) / (hm * hp * (hm + hp));
    }
    let one_sided = |k0: usize, k1: usize, k2: usize| {
        // Derivative at xs[k0] of the parabola through the three nodes.
        let (x0, x1, x2) = (xs[k0], xs[k1], xs[k2]);
        u[k0] * (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + u[k1] * (x0 - x2) / ((x1 - x0) * (x1 - x2))
            + u[k2] * (x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    d[0] = one_sided(0, 1, 2);
    d[n - 1] = one_sided(n - 1, n - 2, n - 3);
    d
}

/// Fritsch-Carlson slopes for monotone cubic interpolation.
fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let (h0, h1) = (xs[k] - xs[k - 1], xs[k + 1] - xs[k]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    m
}

/// Cubic Hermite interpolant through `(xs, ys)` with slopes `ms`.
fn hermite(xs: &[f64], ys: &[f64], ms: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1;
    let h = xs[k + 1] - xs[k];
    let s = (x - xs[k]) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * ys[k]
        + (s3 - 2.0 * s2 + s) * h * ms[k]
        + (-2.0 * s3 + 3.0 * s2) * ys[k + 1]
        + (s3 - s2) * h * ms[k + 1]
}

/// `u*(p, y) = x p - u(x, y)` with `p = u_x(x, y)`, on a uniform `p` grid with
/// as many points as `rows.xs`.
pub fn plt_forward(rows: &RowSamples) -> Result<PLTGrid> {
    plt_forward_with(rows, rows.xs.len())
}

pub fn plt_forward_with(rows: &RowSamples, np: usize) -> Result<PLTGrid> {
    let nx = rows.xs.len();
    if nx < 3 || np < 2 || rows.values.len() != nx * rows.ys.len() {
        return Err(Error::InvalidArgument("need at least 3 columns and a full tensor block".into()));
    }
    let mut slopes = Vec::with_capacity(rows.ys.len());
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..rows.ys.len() {
        let d = derivative(&rows.xs, rows.row(j));
        if d.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::ConvexityFailure { row: j });
        }
        lo = lo.max(d[0]);
        hi = hi.min(d[nx - 1]);
        slopes.push(d);
    }
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "rows share no common slope range ([{lo}, {hi}])"
        )));
    }
    let shrink = 0.05 * (hi - lo);
    let (p0, p1) = (lo + shrink, hi - shrink);
    let ps: Vec<f64> = (0..np).map(|k| p0 + (p1 - p0) * k as f64 / (np - 1) as f64).collect();
    let mut values = Vec::with_capacity(np * rows.ys.len());
    for (j, d) in slopes.iter().enumerate() {
        let inv = pchip_slopes(d, &rows.xs);
        let u = rows.row(j);
        for &p in &ps {
            let x = hermite(d, &rows.xs, &inv, p);
            values.push(x * p - hermite(&rows.xs, u, d, x));
        }
    }
    Ok(PLTGrid {
        ps,
        ys: rows.ys.clone(),
        values,
        provenance: Provenance::Transformed,
    })
}

/// Sup distance between `rows` and their double transform, comparing on the
/// back-transformed grid by Hermite interpolation of the original rows.
pub fn involution_error(rows: &RowSamples) -> Result<f64> {
    let back = plt_forward(&plt_forward(rows)?.as_rows())?;
    let mut sup = 0.0f64;
    for j in 0..rows.ys.len() {
        let u = rows.row(j);
        let d = derivative(&rows.xs, u);
        for (i, &x) in back.ps.iter().enumerate() {
            sup = sup.max((back.at(i, j) - hermite(&rows.xs, u, &d, x)).abs());
        }
    }
    Ok(sup)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlResidual {
    pub sup: f64,
    pub p: f64,
    pub y: f64,
}

/// `sup |u*_pp / phi(u*_p, y) + u*_yy|` over interior nodes above the bottom
/// two rows and with `y >= y_min`.
pub fn pl_residual(grid: &PLTGrid, phi: impl Fn(f64, f64) -> f64, y_min: f64) -> Result<PlResidual> {
    let (np, ny) = (grid.ps.len(), grid.ys.len());
    if np < 3 || ny < 5 {
        return Err(Error::GridTooCoarse(format!("{np} x {ny} grid")));
    }
    let up = grid.p_derivative();
    let mut out = PlResidual {
        sup: 0.0,
        p: f64::NAN,
        y: f64::NAN,
    };
    for j in 2..ny - 1 {
        let y = grid.ys[j];
        if y < y_min {
            continue;
        }
        for i in 1..np - 1 {
            let p = grid.ps[i];
            let x = up[j * np + i];
            let f = phi(x, y);
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::OutsideDomain { p, y, x });
            }
            let upp = second_difference(&grid.ps, i, |k| grid.at(k, j));
            let uyy = second_difference(&grid.ys, j, |k| grid.at(i, k));
            let r = (upp / f + uyy).abs();
            if r > out.sup || out.p.is_nan() {
                out = PlResidual { sup: r, p, y };
            }
        }
    }
    if out.p.is_nan() {
        return Err(Error::GridTooCoarse(format!("no interior rows with y >= {y_min}")));
    }
    Ok(out)
}

/// Bilinear interpolation of nodal data on the grid.
fn bilinear(ps: &[f64], ys: &[f64], data: &[f64], p: f64, y: f64) -> f64 {
    let np = ps.len();
    let i = ps.partition_point(|&v| v <= p).clamp(1, np - 1) - 1;
    let j = ys.partition_point(|&v| v <= y).clamp(1, ys.len() - 1) - 1;
    let s = (p - ps[i]) / (ps[i + 1] - ps[i]);
    let t = (y - ys[j]) / (ys[j + 1] - ys[j]);
    let v = |a: usize, b: usize| data[b * np + a];
    (1.0 - t) * ((1.0 - s) * v(i, j) + s * v(i + 1, j)) + t * ((1.0 - s) * v(i, j + 1) + s * v(i + 1, j + 1))
}

/// `|u*_p(p0 + r^{1/2} dp, r dy) - u*_p(p0, 0)| / r^alpha` for `r = 4^-k`,
/// `k = 1..=levels`.
pub fn weighted_holder(grid: &PLTGrid, p0: f64, dir: (f64, f64), alpha: f64, levels: u32) -> Vec<(f64, f64)> {
    let up = grid.p_derivative();
    let base = bilinear(&grid.ps, &grid.ys, &up, p0, 0.0);
    (1..=levels)
        .map(|k| {
            let r = 0.25f64.powi(k as i32);
            let v = bilinear(&grid.ps, &grid.ys, &up, p0 + r.sqrt() * dir.0, r * dir.1);
            (r, (v - base).abs() / r.powf(alpha))
        })
        .collect()
}

/// Half-square grid for the model solver: `p` uniform on `[p0, p1]`,
/// `y_k = height (k / ny)^grading`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelGrid {
    pub p0: f64,
    pub p1: f64,
    pub height: f64,
    pub np: usize,
    pub ny: usize,
    pub grading: f64,
}

impl Default for ModelGrid {
    fn default() -> Self {
        Self {
            p0: -1.0,
            p1: 1.0,
            height: 1.0,
            np: 64,
            ny: 64,
            grading: 2.0,
        }
    }
}

impl ModelGrid {
    pub fn ps(&self) -> Vec<f64> {
        (0..=self.np)
            .map(|i| self.p0 + (self.p1 - self.p0) * i as f64 / self.np as f64)
            .collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..=self.ny)
            .map(|j| self.height * (j as f64 / self.ny as f64).powf(self.grading))
            .collect()
    }
}

/// `u_pp + y a u_yy + b u_p + c u = f` with `u = g` on the boundary of the
/// half-square. Fields are evaluated with `x` standing for `p`.
#[derive(Clone, Debug)]
pub struct DegenerateProblem {
    pub a: ScalarField,
    pub b: ScalarField,
    pub c: ScalarField,
    pub f: ScalarField,
    pub g: ScalarField,
    pub eps: f64,
    pub grid: ModelGrid,
}

impl DegenerateProblem {
    /// The model equation `u_pp + y u_yy = 0` with boundary data `g`.
    pub fn model(g: ScalarField, eps: f64, grid: ModelGrid) -> Self {
        Self {
            a: ScalarField::constant("a", 1.0),
            b: ScalarField::constant("b", 0.0),
            c: ScalarField::constant("c", 0.0),
            f: ScalarField::constant("f", 0.0),
            g,
            eps,
            grid,
        }
    }
}

/// `1/y` above `2 eps`, `1/eps` below `eps`, linear in between.
pub fn eta(eps: f64, y: f64) -> f64 {
    if y <= eps {
        1.0 / eps
    } else if y >= 2.0 * eps {
        1.0 / y
    } else {
        let s = (y - eps) / eps;
        (1.0 - s) / eps + s / (2.0 * eps)
    }
}

/// Sparse system `eta (u_pp + b u_p + c u - f) + a u_yy = 0` over interior
/// nodes, rows scaled to unit diagonal. Returns the matrix and right side.
pub(crate) fn assemble_model(prob: &DegenerateProblem, eps: f64) -> Result<(Csr, Vec<f64>)> {
    let gr = &prob.grid;
    let (ps, ys) = (gr.ps(), gr.ys());
    let (mi, mj) = (gr.np - 1, gr.ny - 1);
    let idx = |i: usize, j: usize| (j - 1) * mi + (i - 1);
    let hp = ps[1] - ps[0];
    let mut trip = Vec::with_capacity(5 * mi * mj);
    let mut rhs = vec![0.0; mi * mj];
    for j in 1..=mj {
        let y = ys[j];
        let (hm, hq) = (y - ys[j - 1], ys[j + 1] - y);
        let e = eta(eps, y);
        for i in 1..=mi {
            let p = ps[i];
            let a = prob.a.eval_xy(p, y);
            if !(a > 0.0) {
                return Err(Error::NonPositiveCoefficient { p, y });
            }
            let b = prob.b.eval_xy(p, y);
            let c = prob.c.eval_xy(p, y);
            let f = prob.f.eval_xy(p, y);
            let wy = 2.0 * a / (hm + hq);
            let stencil = [
                (i - 1, j, e * (1.0 / (hp * hp) - b / (2.0 * hp))),
                (i + 1, j, e * (1.0 / (hp * hp) + b / (2.0 * hp))),
                (i, j - 1, wy / hm),
                (i, j + 1, wy / hq),
                (i, j, e * (c - 2.0 / (hp * hp)) - wy / hm - wy / hq),
            ];
            let diag = stencil[4].2;
            if diag == 0.0 {
                return Err(Error::InvalidArgument(format!("singular row at ({p}, {y})")));
            }
            let row = idx(i, j);
            let mut r = e * f;
            for &(ii, jj, w) in &stencil {
                if ii == 0 || ii == gr.np || jj == 0 || jj == gr.ny {
                    r -= w * prob.g.eval_xy(ps[ii], ys[jj]);
                } else {
                    trip.push((row, idx(ii, jj), w / diag));
                }
            }
            rhs[row] = r / diag;
        }
    }
    Ok((Csr::from_triplets(mi * mj, trip), rhs))
}

/// Solves the regularised problem along `eps_k = 2^-k` from 1/8 down to
/// `prob.eps`, warm-starting each solve from the previous one.
pub fn model_solve(prob: &DegenerateProblem) -> Result<PLTGrid> {
    let gr = &prob.grid;
    if !(prob.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {} must be positive", prob.eps)));
    }
    if gr.np < 4 || gr.ny < 4 || !(gr.p1 > gr.p0) || !(gr.height > 0.0) || !(gr.grading >= 1.0) {
        return Err(Error::InvalidArgument(format!("bad model grid {gr:?}")));
    }
    let (ps, ys) = (gr.ps(), gr.ys());
    let rows = ys.iter().filter(|&&y| y <= 2.0 * prob.eps).count();
    if rows < 4 {
        return Err(Error::GridTooCoarse(format!(
            "only {rows} rows in y <= 2 eps = {}; refine or grade the y grid",
            2.0 * prob.eps
        )));
    }
    let mut schedule = Vec::new();
    let mut e = 0.125;
    while e > prob.eps {
        schedule.push(e);
        e *= 0.5;
    }
    schedule.push(prob.eps);

    let (mi, mj) = (gr.np - 1, gr.ny - 1);
    // Start from the boundary data interpolated linearly in y.
    let top = |i: usize| prob.g.eval_xy(ps[i], gr.height);
    let bottom = |i: usize| prob.g.eval_xy(ps[i], 0.0);
    let mut x: Vec<f64> = (1..=mj)
        .flat_map(|j| (1..=mi).map(move |i| (i, j)))
        .map(|(i, j)| {
            let s = ys[j] / gr.height;
            (1.0 - s) * bottom(i) + s * top(i)
        })
        .collect();
    for &eps in &schedule {
        let (a, b) = assemble_model(prob, eps)?;
        let pre = Ilu0::new(&a)?;
        let stats = bicgstab(&a, &pre, &b, &mut x, 1e-10, 20_000)?;
        log::debug!("model solve eps={eps:.3e}: {} iterations, residual {:.2e}", stats.iterations, stats.residual);
    }
    let mut values = Vec::with_capacity(ps.len() * ys.len());
    for (j, &y) in ys.iter().enumerate() {
        for (i, &p) in ps.iter().enumerate() {
            let boundary = i == 0 || i == gr.np || j == 0 || j == gr.ny;
            values.push(if boundary {
                prob.g.eval_xy(p, y)
            } else {
                x[(j - 1) * mi + (i - 1)]
            });
        }
    }
    Ok(PLTGrid {
        ps,
        ys,
        values,
        provenance: Provenance::Model { eps: prob.eps },
    })
}

/// `(max interior - max boundary, min boundary - min interior)`; both are
/// `<= 0` when the discrete maximum principle holds.
pub fn max_principle_gaps(grid: &PLTGrid) -> (f64, f64) {
    let (np, ny) = (grid.ps.len(), grid.ys.len());
    let (mut bmax, mut bmin) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut imax, mut imin) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..ny {
        for i in 0..np {
            let v = grid.at(i, j);
            if i == 0 || j == 0 || i == np - 1 || j == ny - 1 {
                bmax = bmax.max(v);
                bmin = bmin.min(v);
            } else {
                imax = imax.max(v);
                imin = imin.min(v);
            }
        }
    }
    (imax - bmax, bmin - imin)
}
