//! Discrete Dirichlet problem `phi(x_i) |du(x_i)| = c_i`.

use std::sync::Arc;

use log::{debug, info};

use super::cell::{subgradient_cell, Cell};
use super::grid::{build_grid, GridSpec, NodeSet, SpatialIndex};
use crate::edge_ode::BoundaryData;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Polytope, Vec2};
use crate::linalg::{bicgstab, Csr, Ilu0};

/// How the weight `phi` in `det D^2 u = 1 / phi` is given.
#[derive(Clone, Debug)]
pub enum Weight {
    /// `phi = h prod l_i`.
    Guillemin(ScalarField),
    /// `phi` directly.
    Phi(ScalarField),
}

impl Weight {
    pub fn phi(&self, polytope: &Polytope, x: &Vec2) -> f64 {
        match self {
            Weight::Guillemin(h) => h.eval(x) * polytope.face_product(x),
            Weight::Phi(phi) => phi.eval(x),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Weight::Guillemin(h) => h.name(),
            Weight::Phi(phi) => phi.name(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Damped Newton on all node values at once.
    Newton,
    /// Gauss-Seidel sweeps raising one node at a time from the lower barrier.
    Perron,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Relative mass residual `|phi w - c| / c` to reach at every node.
    pub tol: f64,
    /// Newton iterations or Gauss-Seidel sweeps.
    pub max_iter: usize,
    pub method: Method,
    /// Candidate neighbours for subgradient cells: Voronoi rings around the
    /// node. `None` uses every node.
    pub rings: Option<usize>,
    /// Start Newton from the solution at half the resolution (recursively,
    /// down to [`COARSEST`]).
    pub multilevel: bool,
}

/// Coarsest resolution of the multilevel start.
pub const COARSEST: usize = 16;

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            method: Method::Newton,
            rings: Some(3),
            multilevel: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MAProblem {
    pub polytope: Polytope,
    pub weight: Weight,
    pub boundary: BoundaryData,
    pub grid: GridSpec,
    pub options: SolverOptions,
}

/// Node values of a piecewise-linear convex function.
#[derive(Clone, Debug)]
pub struct DiscreteConvexFn {
    pub nodes: Arc<NodeSet>,
    pub values: Vec<f64>,
}

impl DiscreteConvexFn {
    pub fn interior(&self) -> &[f64] {
        &self.values[..self.nodes.n_interior]
    }

    /// Exact subgradient cells of all interior nodes: computed against nearby
    /// nodes, then certified against every node.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut state = State::with_rings(&self.nodes, Some(3));
        loop {
            let cells = state.cells(&self.values)?;
            if state.certify(&self.values, &cells) == 0 {
                return Ok(cells);
            }
        }
    }

    /// Interior nodes strictly above the lower envelope of the others
    /// (empty subgradient cell).
    pub fn off_envelope(&self) -> Result<Vec<usize>> {
        Ok(self
            .cells()?
            .iter()
            .enumerate()
            .filter(|(_, c)| c.polygon.is_empty())
            .map(|(i, _)| i)
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// Max relative mass residual after each iteration.
    pub history: Vec<f64>,
    pub max_residual: f64,
    /// Candidate sets had to be enlarged this many times during certification.
    pub enlargements: usize,
}

/// Per-node mass residuals.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// `|phi w - c| / c` per interior node.
    pub relative: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// `sum phi(x_i) w_i`.
    pub total_mass: f64,
    pub area: f64,
}

impl ResidualReport {
    pub fn total_relative(&self) -> f64 {
        (self.total_mass - self.area).abs() / self.area
    }
}

/// Values of the boundary data at the boundary nodes.
pub fn boundary_values(nodes: &NodeSet, data: &BoundaryData) -> Result<Vec<f64>> {
    nodes
        .boundary
        .iter()
        .map(|&(e, t)| data.value(&nodes.polytope, e, t))
        .collect()
}

/// Reject boundary data that is not convex along some edge.
pub fn check_boundary_convexity(nodes: &NodeSet, values: &[f64]) -> Result<()> {
    let nb = nodes.boundary.len();
    let first = nodes.n_interior;
    let scale = values[first..].iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut k = 0;
    while k < nb {
        let edge = nodes.boundary[k].0;
        let mut run: Vec<(f64, f64)> = Vec::new();
        let mut m = k;
        while m < nb && nodes.boundary[m].0 == edge {
            run.push((nodes.boundary[m].1, values[first + m]));
            m += 1;
        }
        // Closing vertex: first node of the next edge.
        let len = nodes.polytope.edge_frame(edge)?.length;
        run.push((len, values[first + (m % nb)]));
        for w in run.windows(3) {
            let (t0, a) = w[0];
            let (t1, b) = w[1];
            let (t2, c) = w[2];
            let d2 = ((c - b) / (t2 - t1) - (b - a) / (t1 - t0)) / (t2 - t0);
            if d2 < -1e-10 * scale / ((t2 - t0) * (t2 - t0)).max(1e-300) {
                return Err(Error::NonConvexTrace { edge, t: t1 });
            }
        }
        k = m;
    }
    Ok(())
}

struct State<'a> {
    nodes: &'a NodeSet,
    candidates: Vec<Vec<usize>>,
    targets: Vec<f64>,
}

impl<'a> State<'a> {
    fn with_rings(nodes: &'a NodeSet, rings: Option<usize>) -> Self {
        let candidates = (0..nodes.n_interior)
            .map(|i| match rings {
                Some(r) => nodes.ring(i, r),
                None => (0..nodes.len()).filter(|&j| j != i).collect(),
            })
            .collect();
        Self {
            nodes,
            candidates,
            targets: Vec::new(),
        }
    }

    fn new(nodes: &'a NodeSet, phi: &[f64], rings: Option<usize>) -> Self {
        let mut s = Self::with_rings(nodes, rings);
        s.targets = (0..nodes.n_interior).map(|i| nodes.mass[i] / phi[i]).collect();
        s
    }

    fn cell(&self, values: &[f64], i: usize) -> Result<Cell> {
        subgradient_cell(&self.nodes.points, values, i, &self.candidates[i])
    }

    fn cells(&self, values: &[f64]) -> Result<Vec<Cell>> {
        (0..self.nodes.n_interior).map(|i| self.cell(values, i)).collect()
    }

    fn max_residual(&self, cells: &[Cell]) -> f64 {
        cells
            .iter()
            .zip(&self.targets)
            .map(|(c, t)| (c.area - t).abs() / t)
            .fold(0.0, f64::max)
    }

    fn merit(&self, cells: &[Cell]) -> f64 {
        cells
            .iter()
            .zip(&self.targets)
            .map(|(c, t)| ((c.area - t) / t).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Check every cell vertex against all nodes; widen the candidate sets
    /// where a far node cuts a cell. Returns the number of additions.
    fn certify(&mut self, values: &[f64], cells: &[Cell]) -> usize {
        let pts = &self.nodes.points;
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diam = self.nodes.polytope.diameter();
        let mut added = 0;
        for (i, cell) in cells.iter().enumerate() {
            for p in &cell.polygon.vertices {
                let own = values[i] - p.dot(&pts[i]);
                let tol = 1e-11 * (scale + p.norm() * diam);
                if min_plane_gap(values, &xs, &ys, p.x, p.y) >= own - tol {
                    continue;
                }
                let j = (0..pts.len())
                    .min_by(|&a, &b| {
                        let va = values[a] - p.x * xs[a] - p.y * ys[a];
                        let vb = values[b] - p.x * xs[b] - p.y * ys[b];
                        va.total_cmp(&vb)
                    })
                    .expect("nonempty");
                if j != i && !self.candidates[i].contains(&j) {
                    self.candidates[i].push(j);
                    added += 1;
                }
            }
        }
        added
    }
}

/// `min_j (u_j - a x_j - b y_j)`, written to vectorize.
fn min_plane_gap(values: &[f64], xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = [f64::INFINITY; 4];
    let chunks = values.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let j = 4 * c + l;
            let v = values[j] - a * xs[j] - b * ys[j];
            acc[l] = if v < acc[l] { v } else { acc[l] };
        }
    }
    let mut m = acc[0].min(acc[1]).min(acc[2].min(acc[3]));
    for j in 4 * chunks..values.len() {
        m = m.min(values[j] - a * xs[j] - b * ys[j]);
    }
    m
}

/// `phi(x_i)` at the interior nodes; must be positive.
fn interior_weights(nodes: &NodeSet, weight: &Weight) -> Result<Vec<f64>> {
    (0..nodes.n_interior)
        .map(|i| {
            let x = nodes.points[i];
            let v = weight.phi(&nodes.polytope, &x);
            if !v.is_finite() {
                Err(Error::NonFiniteField {
                    name: weight.name().to_string(),
                    at: x,
                })
            } else if v <= 0.0 {
                Err(Error::NonPositiveField {
                    name: weight.name().to_string(),
                    at: x,
                    value: v,
                })
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Lower barrier `min(boundary) - A (prod l_i / max prod l_i)^(1 / (N + 1))`
/// at the interior nodes.
fn barrier_shape(nodes: &NodeSet) -> Vec<f64> {
    let p = &nodes.polytope;
    let alpha = 1.0 / (p.len() as f64 + 1.0);
    let raw: Vec<f64> = (0..nodes.n_interior)
        .map(|i| p.face_product(&nodes.points[i]).powf(alpha))
        .collect();
    let top = raw.iter().fold(0.0f64, |m, &v| m.max(v));
    raw.iter().map(|v| v / top).collect()
}

pub fn op_solve(problem: &MAProblem) -> Result<(DiscreteConvexFn, SolveReport)> {
    let nodes = Arc::new(build_grid(&problem.polytope, problem.grid)?);
    let bvals = boundary_values(&nodes, &problem.boundary)?;
    let n = problem.grid.resolution;
    let initial = if problem.options.method == Method::Newton && problem.options.multilevel && n % 2 == 0 && n / 2 >= COARSEST {
        let mut coarse = problem.clone();
        coarse.grid.resolution = n / 2;
        let (u, _) = op_solve(&coarse)?;
        Some(convex_interpolant(&u, &nodes)?)
    } else {
        None
    };
    match solve_on_nodes(nodes.clone(), &problem.weight, &bvals, &problem.options, initial.as_deref()) {
        // An interpolated start can leave nodes the repair cannot bring back
        // onto the envelope; the barrier start always works.
        Err(e) if initial.is_some() => {
            info!("interpolated start failed ({e}); restarting from the barrier");
            solve_on_nodes(nodes, &problem.weight, &bvals, &problem.options, None)
        }
        result => result,
    }
}

/// Values at the interior nodes of `target` of the piecewise-linear convex
/// function `u`, as the maximum of the supporting planes at nearby nodes,
/// minus a small multiple of the barrier so that every node starts strictly
/// convex.
fn convex_interpolant(u: &DiscreteConvexFn, target: &NodeSet) -> Result<Vec<f64>> {
    let coarse = &u.nodes;
    let cells = u.cells()?;
    let pts = &coarse.points;
    let interior = &pts[..coarse.n_interior];
    let index = SpatialIndex::new(interior, coarse.spec.resolution);
    let shape = barrier_shape(target);
    let lo = u.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bump = 1e-2 * (hi - lo).max(1e-12);
    let r0 = coarse.polytope.diameter() / coarse.spec.resolution as f64;
    let mut near = Vec::new();
    let mut out = Vec::with_capacity(target.n_interior);
    for k in 0..target.n_interior {
        let x = target.points[k];
        let mut r = r0;
        loop {
            index.within(interior, &x, r, &mut near);
            if !near.is_empty() {
                break;
            }
            r *= 2.0;
        }
        let nearest = near
            .iter()
            .copied()
            .min_by(|&a, &b| (pts[a] - x).norm().total_cmp(&(pts[b] - x).norm()))
            .expect("nonempty");
        let mut v = f64::NEG_INFINITY;
        for i in std::iter::once(nearest).chain(coarse.ring(nearest, 2)) {
            if i >= coarse.n_interior {
                continue;
            }
            for p in &cells[i].polygon.vertices {
                v = v.max(u.values[i] + p.dot(&(x - pts[i])));
            }
        }
        out.push(v - bump * shape[k]);
    }
    Ok(out)
}

/// Solve on a prepared node set. `initial` may give a starting guess for the
/// interior values (Newton only; it must put every node on the envelope).
pub fn solve_on_nodes(
    nodes: Arc<NodeSet>,
    weight: &Weight,
    boundary: &[f64],
    options: &SolverOptions,
    initial: Option<&[f64]>,
) -> Result<(DiscreteConvexFn, SolveReport)> {
    let m = nodes.n_interior;
    let mut values = vec![0.0; nodes.len()];
    values[m..].copy_from_slice(boundary);
    check_boundary_convexity(&nodes, &values)?;
    let phi = interior_weights(&nodes, weight)?;
    let mut state = State::new(&nodes, &phi, options.rings);
    let report = match options.method {
        Method::Newton => newton(&mut state, &mut values, options, initial)?,
        Method::Perron => perron(&mut state, &mut values, options)?,
    };
    Ok((DiscreteConvexFn { nodes, values }, report))
}

fn set_barrier(state: &State, values: &mut [f64], shape: &[f64], scale: f64) {
    let m = state.nodes.n_interior;
    let floor = values[m..].iter().copied().fold(f64::INFINITY, f64::min);
    for i in 0..m {
        values[i] = floor - scale * shape[i];
    }
}

fn newton(state: &mut State, values: &mut [f64], options: &SolverOptions, initial: Option<&[f64]>) -> Result<SolveReport> {
    let m = state.nodes.n_interior;
    let total_target: f64 = state.targets.iter().sum();
    if let Some(init) = initial {
        values[..m].copy_from_slice(init);
    } else {
        // Size the barrier so that the total mass roughly matches; masses grow
        // like the square of the scale.
        let shape = barrier_shape(state.nodes);
        let mut scale = state.nodes.polytope.diameter();
        for _ in 0..6 {
            set_barrier(state, values, &shape, scale);
            let total: f64 = state.cells(values)?.iter().map(|c| c.area).sum();
            let ratio = (total_target / total.max(1e-300)).sqrt();
            scale *= ratio.clamp(0.25, 4.0);
            if (ratio - 1.0).abs() < 0.05 {
                break;
            }
        }
        set_barrier(state, values, &shape, scale);
        debug!("barrier scale {scale:.3e}");
    }

    let mut history = Vec::new();
    let mut enlargements = 0;
    let mut cells = state.cells(values)?;
    if initial.is_some() {
        // Interpolated starts can leave nodes next to freshly inserted
        // boundary nodes (nearly) off the envelope; lower those one at a time.
        for _ in 0..20 {
            let starved: Vec<usize> = (0..m)
                .filter(|&i| cells[i].area < 1e-2 * state.targets[i])
                .collect();
            if starved.is_empty() {
                break;
            }
            debug!("lowering {} starved nodes", starved.len());
            for i in starved {
                adjust_node(state, values, i, 1e-3)?;
            }
            cells = state.cells(values)?;
        }
    }
    for it in 0..options.max_iter {
        let res = state.max_residual(&cells);
        history.push(res);
        debug!("newton {it}: max relative residual {res:.3e}");
        if res <= options.tol {
            let added = state.certify(values, &cells);
            if added == 0 {
                info!("newton converged in {it} iterations, residual {res:.3e}");
                return Ok(SolveReport {
                    method: Method::Newton,
                    iterations: it,
                    max_residual: res,
                    history,
                    enlargements,
                });
            }
            enlargements += 1;
            debug!("certification widened {added} candidate sets");
            cells = state.cells(values)?;
            continue;
        }

        // Jacobian of the cell areas, negated: a weighted graph Laplacian.
        let pts = &state.nodes.points;
        let mut entries = Vec::with_capacity(m * 9);
        for (i, cell) in cells.iter().enumerate() {
            let mut diag = 0.0;
            for (j, w) in cell.weights(pts, i) {
                diag += w;
                if j < m {
                    entries.push((i, j, -w));
                }
            }
            entries.push((i, i, diag.max(1e-300)));
        }
        let lap = Csr::from_triplets(m, entries);
        let rhs: Vec<f64> = cells.iter().zip(&state.targets).map(|(c, t)| c.area - t).collect();
        let pre = Ilu0::new(&lap)?;
        let mut delta = vec![0.0; m];
        bicgstab(&lap, &pre, &rhs, &mut delta, 1e-12, 2000)?;

        let merit0 = state.merit(&cells);
        let min_ratio0 = cells
            .iter()
            .zip(&state.targets)
            .map(|(c, t)| c.area / t)
            .fold(f64::INFINITY, f64::min);
        let floor = 0.5 * min_ratio0.min(1.0);
        let base: Vec<f64> = values[..m].to_vec();
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            for i in 0..m {
                values[i] = base[i] + tau * delta[i];
            }
            if let Ok(trial) = state.cells(values) {
                let ok_mass = trial
                    .iter()
                    .zip(&state.targets)
                    .all(|(c, t)| c.area / t >= floor);
                if ok_mass && state.merit(&trial) <= (1.0 - 0.5 * tau) * merit0 {
                    accepted = Some(trial);
                    break;
                }
            }
            tau *= 0.5;
        }
        match accepted {
            Some(trial) => cells = trial,
            None => {
                values[..m].copy_from_slice(&base);
                return Err(Error::NoConvergence {
                    iterations: it,
                    history,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iter,
        history,
    })
}

fn perron(state: &mut State, values: &mut [f64], options: &SolverOptions) -> Result<SolveReport> {
    let m = state.nodes.n_interior;
    let diam = state.nodes.polytope.diameter();
    let shape = barrier_shape(state.nodes);
    // Double the barrier until every node carries at least its target mass.
    let mut scale = diam;
    loop {
        set_barrier(state, values, &shape, scale);
        let cells = state.cells(values)?;
        if cells.iter().zip(&state.targets).all(|(c, t)| c.area >= *t) {
            break;
        }
        scale *= 2.0;
        if scale > 1e12 * diam {
            return Err(Error::NoConvergence {
                iterations: 0,
                history: vec![],
            });
        }
    }

    let mut history = Vec::new();
    let mut enlargements = 0;
    for sweep in 0..options.max_iter {
        let mut max_change: f64 = 0.0;
        for i in 0..m {
            let before = values[i];
            adjust_node(state, values, i, options.tol * 0.1)?;
            max_change = max_change.max((values[i] - before).abs());
        }
        let cells = state.cells(values)?;
        let res = state.max_residual(&cells);
        history.push(res);
        debug!("perron sweep {sweep}: residual {res:.3e}, change {max_change:.3e}");
        if res <= options.tol && max_change <= options.tol * diam {
            let added = state.certify(values, &cells);
            if added == 0 {
                return Ok(SolveReport {
                    method: Method::Perron,
                    iterations: sweep + 1,
                    max_residual: res,
                    history,
                    enlargements,
                });
            }
            enlargements += 1;
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iter,
        history,
    })
}

/// Move `u_i` so that its cell area hits the target, all other values fixed.
/// The area is nonincreasing in `u_i`.
fn adjust_node(state: &State, values: &mut [f64], i: usize, rtol: f64) -> Result<()> {
    let target = state.targets[i];
    let u0 = values[i];
    let area_at = |u: f64, values: &mut [f64]| -> Result<f64> {
        values[i] = u;
        Ok(state.cell(values, i)?.area)
    };
    let a0 = area_at(u0, values)?;
    if ((a0 - target) / target).abs() <= rtol {
        values[i] = u0;
        return Ok(());
    }
    // Bracket [lo, hi] with area(lo) >= target >= area(hi).
    let diam = state.nodes.polytope.diameter();
    let mut step = 1e-3 * diam.max(u0.abs() * 1e-3);
    let (mut lo, mut hi);
    if a0 > target {
        lo = u0;
        hi = u0 + step;
        while area_at(hi, values)? > target {
            lo = hi;
            step *= 2.0;
            hi += step;
        }
    } else {
        hi = u0;
        lo = u0 - step;
        while area_at(lo, values)? < target {
            hi = lo;
            step *= 2.0;
            lo -= step;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let a = area_at(mid, values)?;
        if ((a - target) / target).abs() <= rtol {
            lo = mid;
            hi = mid;
            break;
        }
        if a > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    values[i] = 0.5 * (lo + hi);
    Ok(())
}

/// Mass residuals of `u` for the discrete equation of `problem`, using cells
/// against every node.
pub fn ma_residual(u: &DiscreteConvexFn, weight: &Weight) -> Result<ResidualReport> {
    let nodes = &u.nodes;
    let phi = interior_weights(nodes, weight)?;
    let cells = u.cells()?;
    let relative: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (phi[i] * c.area - nodes.mass[i]).abs() / nodes.mass[i])
        .collect();
    let total_mass = cells.iter().enumerate().map(|(i, c)| phi[i] * c.area).sum();
    let max = relative.iter().copied().fold(0.0, f64::max);
    let mean = relative.iter().sum::<f64>() / relative.len() as f64;
    Ok(ResidualReport {
        relative,
        max,
        mean,
        total_mass,
        area: nodes.polytope.area(),
    })
}

/// Rows `(x, y, u)` for every node.
pub fn solution_rows(u: &DiscreteConvexFn) -> Vec<[f64; 3]> {
    u.nodes
        .points
        .iter()
        .zip(&u.values)
        .map(|(p, v)| [p.x, p.y, *v])
        .collect()
}
