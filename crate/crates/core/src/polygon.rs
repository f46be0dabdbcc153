//! Convex polygons built by repeated half-plane clipping.
//!
//! Every edge remembers the constraint that produced it, so that callers can
//! read off which neighbor owns each side of a subgradient or Voronoi cell and
//! recompute vertices as exact intersections of two constraint lines.

use crate::geometry::{cross, Vec2};

/// Closed half-plane `{p : normal . p <= offset}` tagged with an owner id.
#[derive(Clone, Copy, Debug)]
pub struct Constraint {
    pub normal: Vec2,
    pub offset: f64,
    pub owner: usize,
}

impl Constraint {
    pub fn new(normal: Vec2, offset: f64, owner: usize) -> Self {
        Self {
            normal,
            offset,
            owner,
        }
    }

    #[inline]
    pub fn slack(&self, p: &Vec2) -> f64 {
        self.offset - self.normal.dot(p)
    }

    fn intersect(&self, other: &Constraint) -> Option<Vec2> {
        let det = cross(&self.normal, &other.normal);
        if det.abs() < 1e-300 {
            return None;
        }
        let x = (self.offset * other.normal.y - other.offset * self.normal.y) / det;
        let y = (self.normal.x * other.offset - other.normal.x * self.offset) / det;
        Some(Vec2::new(x, y))
    }
}

/// Marker for edges that still come from the initial bounding box.
pub const BOX_OWNER: usize = usize::MAX;

/// Counterclockwise convex polygon. `owners[k]` is the owner of the edge from
/// `vertices[k]` to `vertices[k + 1]`.
#[derive(Clone, Debug, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
    pub owners: Vec<usize>,
}

impl ConvexPolygon {
    pub fn from_box(lo: Vec2, hi: Vec2) -> Self {
        Self {
            vertices: vec![
                Vec2::new(lo.x, lo.y),
                Vec2::new(hi.x, lo.y),
                Vec2::new(hi.x, hi.y),
                Vec2::new(lo.x, hi.y),
            ],
            owners: vec![BOX_OWNER; 4],
        }
    }

    /// Polygon from counterclockwise vertices with explicit edge owners.
    pub fn from_vertices(vertices: Vec<Vec2>, owners: Vec<usize>) -> Self {
        debug_assert_eq!(vertices.len(), owners.len());
        Self { vertices, owners }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut a = 0.0;
        let mut c = Vec2::zeros();
        for k in 0..n {
            let p = self.vertices[k];
            let q = self.vertices[(k + 1) % n];
            let w = cross(&p, &q);
            a += w;
            c += (p + q) * w;
        }
        if a.abs() < 1e-300 {
            return self.vertices.iter().sum::<Vec2>() / n.max(1) as f64;
        }
        c / (3.0 * a)
    }

    pub fn touches_box(&self) -> bool {
        self.owners.iter().any(|&o| o == BOX_OWNER)
    }

    /// Largest distance from `center` to a vertex.
    pub fn radius_about(&self, center: &Vec2) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max)
    }

    /// Sutherland-Hodgman clip against one constraint.
    pub fn clip(&mut self, c: &Constraint) {
        let n = self.vertices.len();
        if n == 0 {
            return;
        }
        let slack: Vec<f64> = self.vertices.iter().map(|v| c.slack(v)).collect();
        if slack.iter().all(|&s| s >= 0.0) {
            return;
        }
        if slack.iter().all(|&s| s < 0.0) {
            self.vertices.clear();
            self.owners.clear();
            return;
        }
        let mut verts = Vec::with_capacity(n + 1);
        let mut owners = Vec::with_capacity(n + 1);
        for k in 0..n {
            let kn = (k + 1) % n;
            let (p, q) = (self.vertices[k], self.vertices[kn]);
            let (sp, sq) = (slack[k], slack[kn]);
            if sp >= 0.0 {
                verts.push(p);
                owners.push(self.owners[k]);
                if sq < 0.0 {
                    let t = sp / (sp - sq);
                    verts.push(p + (q - p) * t);
                    owners.push(c.owner);
                }
            } else if sq >= 0.0 {
                let t = sp / (sp - sq);
                verts.push(p + (q - p) * t);
                owners.push(self.owners[k]);
            }
        }
        // Drop zero-length edges that clipping through a vertex leaves behind.
        let mut out_v: Vec<Vec2> = Vec::with_capacity(verts.len());
        let mut out_o: Vec<usize> = Vec::with_capacity(verts.len());
        for (v, o) in verts.into_iter().zip(owners) {
            if let Some(last) = out_v.last() {
                if (v - last).norm() <= 1e-300 {
                    *out_o.last_mut().unwrap() = o;
                    continue;
                }
            }
            out_v.push(v);
            out_o.push(o);
        }
        while out_v.len() > 1 && (out_v[0] - out_v[out_v.len() - 1]).norm() <= 1e-300 {
            out_v.pop();
            out_o.pop();
        }
        let (verts, owners) = (out_v, out_o);
        self.vertices = verts;
        self.owners = owners;
    }

    /// Recompute every vertex as the intersection of the two constraint lines
    /// that meet there. Removes the round-off that clipping a large initial box
    /// introduces.
    pub fn refine(&mut self, lookup: impl Fn(usize) -> Option<Constraint>) {
        let n = self.vertices.len();
        if n < 3 {
            return;
        }
        for k in 0..n {
            let prev = self.owners[(k + n - 1) % n];
            let next = self.owners[k];
            if let (Some(a), Some(b)) = (lookup(prev), lookup(next)) {
                if let Some(p) = a.intersect(&b) {
                    self.vertices[k] = p;
                }
            }
        }
    }

    /// Length of each edge, paired with its owner.
    pub fn edges(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| {
            (
                self.owners[k],
                (self.vertices[(k + 1) % n] - self.vertices[k]).norm(),
            )
        })
    }
}

pub fn shoelace(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for k in 0..n {
        a += cross(&vertices[k], &vertices[(k + 1) % n]);
    }
    0.5 * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_to_triangle() {
        let mut poly = ConvexPolygon::from_box(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        poly.clip(&Constraint::new(Vec2::new(1.0, 1.0), 1.0, 7));
        assert!((poly.area() - 0.5).abs() < 1e-15);
        assert_eq!(poly.vertices.len(), 3);
        assert_eq!(poly.owners.iter().filter(|&&o| o == 7).count(), 1);
    }

    #[test]
    fn clip_through_vertex_keeps_polygon_simple() {
        let mut poly = ConvexPolygon::from_box(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        // Line through two opposite corners.
        poly.clip(&Constraint::new(Vec2::new(-1.0, 1.0), 0.0, 3));
        assert!((poly.area() - 0.5).abs() < 1e-15);
        assert_eq!(poly.vertices.len(), 3);
    }

    #[test]
    fn clip_away_everything() {
        let mut poly = ConvexPolygon::from_box(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        poly.clip(&Constraint::new(Vec2::new(1.0, 0.0), -1.0, 0));
        assert!(poly.is_empty());
        assert_eq!(poly.area(), 0.0);
    }

    #[test]
    fn refine_recovers_exact_vertices() {
        let big = 1e9;
        let mut poly = ConvexPolygon::from_box(Vec2::new(-big, -big), Vec2::new(big, big));
        let cons = [
            Constraint::new(Vec2::new(1.0, 0.0), 0.3, 0),
            Constraint::new(Vec2::new(-1.0, 0.0), 0.1, 1),
            Constraint::new(Vec2::new(0.0, 1.0), 0.2, 2),
            Constraint::new(Vec2::new(0.0, -1.0), 0.4, 3),
        ];
        for c in &cons {
            poly.clip(c);
        }
        poly.refine(|o| cons.get(o).copied());
        assert!((poly.area() - 0.4 * 0.6).abs() < 1e-14);
        assert!(!poly.touches_box());
    }
}
