//! Graded node sets with Voronoi cells clipped to the polytope.

use crate::error::{Error, Result};
use crate::geometry::{Polytope, Vec2};
use crate::polygon::{Constraint, ConvexPolygon};

/// Owners at or above this value in a Voronoi cell are polytope faces.
const FACE_OWNER: usize = usize::MAX / 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Number of grid intervals across the bounding box.
    pub resolution: usize,
    /// Grading exponent; 1 is uniform, smaller values cluster nodes at the
    /// boundary with spacing growing like `distance^(1 - grading)`.
    pub grading: f64,
    /// Credit the Voronoi areas of boundary nodes to the nearest interior node.
    pub lump_boundary: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 64,
            grading: 0.5,
            lump_boundary: true,
        }
    }
}

/// Map of `[0, 1]` onto itself that clusters points at both ends.
pub fn grading_map(s: f64, grading: f64) -> f64 {
    if grading == 1.0 {
        return s;
    }
    let q = 1.0 / grading;
    let a = s.powf(q);
    let b = (1.0 - s).powf(q);
    a / (a + b)
}

/// The tensor grid the interior nodes were taken from.
#[derive(Clone, Debug)]
pub struct TensorGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `node[j * xs.len() + i]`: node placed at `(xs[i], ys[j])`, if any.
    pub node: Vec<Option<usize>>,
}

impl TensorGrid {
    pub fn at(&self, i: usize, j: usize) -> Option<usize> {
        self.node[j * self.xs.len() + i]
    }
}

/// Nodes `0..n_interior` are interior, the rest lie on the boundary.
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub polytope: Polytope,
    pub spec: GridSpec,
    pub points: Vec<Vec2>,
    pub n_interior: usize,
    /// Voronoi area of every node, clipped to the polytope.
    pub cell_area: Vec<f64>,
    /// Area each interior node is responsible for in the discrete equation.
    pub mass: Vec<f64>,
    /// `(edge, t)` of each boundary node.
    pub boundary: Vec<(usize, f64)>,
    /// Voronoi neighbours of every node.
    pub neighbors: Vec<Vec<usize>>,
    pub tensor: TensorGrid,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_interior(&self, k: usize) -> bool {
        k < self.n_interior
    }

    pub fn boundary_nodes(&self) -> std::ops::Range<usize> {
        self.n_interior..self.points.len()
    }

    /// All nodes within `rings` steps of `k` in the Voronoi graph, excluding `k`.
    pub fn ring(&self, k: usize, rings: usize) -> Vec<usize> {
        let mut seen = vec![k];
        let mut frontier = vec![k];
        for _ in 0..rings {
            let mut next = Vec::new();
            for &a in &frontier {
                for &b in &self.neighbors[a] {
                    if !seen.contains(&b) {
                        seen.push(b);
                        next.push(b);
                    }
                }
            }
            frontier = next;
        }
        seen.swap_remove(0);
        seen
    }
}

/// Uniform bucket grid for radius queries.
pub(crate) struct SpatialIndex {
    lo: Vec2,
    size: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SpatialIndex {
    pub(crate) fn new(points: &[Vec2], per_side: usize) -> Self {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).max().max(1e-300);
        let size = extent / per_side.max(1) as f64;
        let nx = ((hi.x - lo.x) / size) as usize + 1;
        let ny = ((hi.y - lo.y) / size) as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, p) in points.iter().enumerate() {
            let (i, j) = Self::bucket_of(lo, size, nx, ny, p);
            buckets[j * nx + i].push(k);
        }
        Self {
            lo,
            size,
            nx,
            ny,
            buckets,
        }
    }

    fn bucket_of(lo: Vec2, size: f64, nx: usize, ny: usize, p: &Vec2) -> (usize, usize) {
        let i = (((p.x - lo.x) / size).floor().max(0.0) as usize).min(nx - 1);
        let j = (((p.y - lo.y) / size).floor().max(0.0) as usize).min(ny - 1);
        (i, j)
    }

    /// Indices of points within distance `r` of `c`.
    pub(crate) fn within(&self, points: &[Vec2], c: &Vec2, r: f64, out: &mut Vec<usize>) {
        out.clear();
        let (i0, j0) = Self::bucket_of(self.lo, self.size, self.nx, self.ny, &(c - Vec2::new(r, r)));
        let (i1, j1) = Self::bucket_of(self.lo, self.size, self.nx, self.ny, &(c + Vec2::new(r, r)));
        for j in j0..=j1 {
            for i in i0..=i1 {
                for &k in &self.buckets[j * self.nx + i] {
                    if (points[k] - c).norm() <= r {
                        out.push(k);
                    }
                }
            }
        }
    }
}

/// Voronoi cell of `points[k]` within the polytope, by clipping against
/// bisectors of all points closer than twice the cell's radius.
fn voronoi_cell(polytope: &Polytope, points: &[Vec2], index: &SpatialIndex, k: usize, r0: f64) -> ConvexPolygon {
    let x = points[k];
    let base = {
        let mut p = polytope.as_polygon();
        for o in &mut p.owners {
            *o += FACE_OWNER;
        }
        p
    };
    let mut r = r0;
    let mut near = Vec::new();
    loop {
        index.within(points, &x, r, &mut near);
        let mut cell = base.clone();
        for &j in &near {
            if j == k {
                continue;
            }
            let d = points[j] - x;
            cell.clip(&Constraint::new(d, 0.5 * (points[j].norm_squared() - x.norm_squared()), j));
        }
        // Anything farther than twice the cell's radius cannot cut it.
        if 2.0 * cell.radius_about(&x) <= r || r > 4.0 * polytope.diameter() {
            return cell;
        }
        r *= 2.0;
    }
}

pub fn build_grid(polytope: &Polytope, spec: GridSpec) -> Result<NodeSet> {
    let n = spec.resolution;
    if n < 8 {
        return Err(Error::ResolutionTooSmall(n));
    }
    if !(spec.grading > 0.0 && spec.grading <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grading exponent {} outside (0, 1]",
            spec.grading
        )));
    }
    let (lo, hi) = polytope.bbox();
    let xs: Vec<f64> = (0..=n)
        .map(|k| lo.x + (hi.x - lo.x) * grading_map(k as f64 / n as f64, spec.grading))
        .collect();
    let ys: Vec<f64> = (0..=n)
        .map(|k| lo.y + (hi.y - lo.y) * grading_map(k as f64 / n as f64, spec.grading))
        .collect();
    let spacing = |v: &[f64], k: usize| -> f64 {
        let a = if k > 0 { v[k] - v[k - 1] } else { f64::INFINITY };
        let b = if k + 1 < v.len() { v[k + 1] - v[k] } else { f64::INFINITY };
        a.min(b)
    };

    let mut points = Vec::new();
    let mut node = vec![None; (n + 1) * (n + 1)];
    for j in 1..n {
        for i in 1..n {
            let x = Vec2::new(xs[i], ys[j]);
            let h = spacing(&xs, i).min(spacing(&ys, j));
            if polytope.min_face(&x) >= 0.3 * h {
                node[j * (n + 1) + i] = Some(points.len());
                points.push(x);
            }
        }
    }
    let n_interior = points.len();
    if n_interior == 0 {
        return Err(Error::ResolutionTooSmall(n));
    }

    // Boundary nodes: on bounding-box sides reuse the grid lines, elsewhere
    // grade the edge on its own.
    let extent = (hi - lo).max();
    let mut boundary = Vec::new();
    for frame in polytope.edge_frames() {
        let len = frame.length;
        let end = frame.point(len, 0.0);
        let tol = 1e-12 * extent;
        let mut ts: Vec<f64> = if (frame.origin.y - lo.y).abs() < tol && (end.y - lo.y).abs() < tol
            || (frame.origin.y - hi.y).abs() < tol && (end.y - hi.y).abs() < tol
        {
            xs.iter().map(|&x| (x - frame.origin.x) * frame.tangent.x).collect()
        } else if (frame.origin.x - lo.x).abs() < tol && (end.x - lo.x).abs() < tol
            || (frame.origin.x - hi.x).abs() < tol && (end.x - hi.x).abs() < tol
        {
            ys.iter().map(|&y| (y - frame.origin.y) * frame.tangent.y).collect()
        } else {
            let m = ((len / extent * n as f64).round() as usize).max(2);
            (0..=m).map(|k| len * grading_map(k as f64 / m as f64, spec.grading)).collect()
        };
        ts.retain(|&t| t > -tol && t < len - tol);
        ts.sort_by(|a, b| a.total_cmp(b));
        ts[0] = 0.0;
        for t in ts {
            let x = frame.point(t, 0.0);
            if let Some(i) = tensor_index(&xs, &ys, &x, tol) {
                node[i] = Some(points.len());
            }
            boundary.push((frame.index, t));
            points.push(x);
        }
    }

    let index = SpatialIndex::new(&points, n);
    let r0 = 3.0 * extent / n as f64;
    let mut cell_area = Vec::with_capacity(points.len());
    let mut neighbors = Vec::with_capacity(points.len());
    for k in 0..points.len() {
        let cell = voronoi_cell(polytope, &points, &index, k, r0);
        cell_area.push(cell.area());
        let mut nb: Vec<usize> = cell
            .edges()
            .filter(|&(o, len)| o < FACE_OWNER && len > 1e-14 * extent)
            .map(|(o, _)| o)
            .collect();
        nb.sort_unstable();
        nb.dedup();
        neighbors.push(nb);
    }
    // Voronoi adjacency is symmetric up to round-off in degenerate ties.
    for k in 0..points.len() {
        for m in neighbors[k].clone() {
            if !neighbors[m].contains(&k) {
                neighbors[m].push(k);
            }
        }
    }

    let mut mass = cell_area[..n_interior].to_vec();
    if spec.lump_boundary {
        let interior_index = SpatialIndex::new(&points[..n_interior], n);
        let mut near = Vec::new();
        for b in n_interior..points.len() {
            let mut r = r0;
            loop {
                interior_index.within(&points[..n_interior], &points[b], r, &mut near);
                if let Some(&k) = near.iter().min_by(|&&a, &&c| {
                    let da = (points[a] - points[b]).norm();
                    let dc = (points[c] - points[b]).norm();
                    da.total_cmp(&dc).then(a.cmp(&c))
                }) {
                    mass[k] += cell_area[b];
                    break;
                }
                r *= 2.0;
            }
        }
    }

    Ok(NodeSet {
        polytope: polytope.clone(),
        spec,
        points,
        n_interior,
        cell_area,
        mass,
        boundary,
        neighbors,
        tensor: TensorGrid { xs, ys, node },
    })
}

fn tensor_index(xs: &[f64], ys: &[f64], x: &Vec2, tol: f64) -> Option<usize> {
    let i = xs.iter().position(|&v| (v - x.x).abs() <= tol)?;
    let j = ys.iter().position(|&v| (v - x.y).abs() <= tol)?;
    Some(j * xs.len() + i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> GridSpec {
        GridSpec {
            resolution: n,
            grading: 1.0,
            lump_boundary: true,
        }
    }

    #[test]
    fn uniform_square_cells() {
        let g = build_grid(&Polytope::unit_square(), uniform(8)).unwrap();
        assert_eq!(g.n_interior, 49);
        for k in 0..49 {
            assert!((g.cell_area[k] - 1.0 / 64.0).abs() < 1e-15);
        }
        assert_eq!(g.len() - g.n_interior, 32);
        let total: f64 = g.cell_area.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let lumped: f64 = g.mass.iter().sum();
        assert!((lumped - 1.0).abs() < 1e-12);
        // Interior neighbours on a uniform grid: the four axis neighbours.
        let c = g.tensor.at(4, 4).unwrap();
        assert_eq!(g.neighbors[c].len(), 4);
    }

    #[test]
    fn graded_square_is_finer_near_boundary() {
        let g = build_grid(&Polytope::unit_square(), GridSpec { resolution: 8, ..Default::default() }).unwrap();
        let xs = &g.tensor.xs;
        assert!(xs[1] - xs[0] < xs[4] - xs[3]);
        let total: f64 = g.cell_area.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(g.cell_area.iter().all(|&a| a > 0.0));
        for v in Polytope::unit_square().vertices() {
            assert!(g.points[g.n_interior..].iter().any(|p| (p - v).norm() < 1e-15));
        }
    }

    #[test]
    fn triangle_and_pentagon_nodes_inside() {
        let tri = Polytope::from_vertices(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let pent = Polytope::from_vertices(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.2),
            Vec2::new(2.5, 1.5),
            Vec2::new(1.0, 2.3),
            Vec2::new(-0.4, 1.2),
        ])
        .unwrap();
        for p in [tri, pent] {
            for n in [8, 13, 32] {
                let g = build_grid(&p, GridSpec { resolution: n, ..Default::default() }).unwrap();
                for k in 0..g.n_interior {
                    assert!(p.contains(&g.points[k]));
                }
                for b in g.boundary_nodes() {
                    assert!(p.min_face(&g.points[b]).abs() < 1e-12);
                }
                let total: f64 = g.cell_area.iter().sum();
                assert!((total - p.area()).abs() < 1e-10 * p.area(), "{total}");
                let lumped: f64 = g.mass.iter().sum();
                assert!((lumped - p.area()).abs() < 1e-10 * p.area());
                for v in p.vertices() {
                    assert!(g.points[g.n_interior..].iter().any(|q| (q - v).norm() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn too_coarse() {
        assert!(matches!(
            build_grid(&Polytope::unit_square(), uniform(4)),
            Err(Error::ResolutionTooSmall(4))
        ));
    }
}
