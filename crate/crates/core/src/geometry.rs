//! Convex polygons given as intersections of half-planes `l_i(x) = n_i . x - lambda_i > 0`.
//!
//! Faces are stored counterclockwise with unit inward normals. Vertex `v_i` is
//! the intersection of faces `i - 1` and `i` (indices cyclic), so edge `i`
//! runs from `v_i` to `v_{i+1}` along face `i`.

use std::f64::consts::PI;

use log::warn;
use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::polygon::{Constraint, ConvexPolygon};

pub type Vec2 = Vector2<f64>;

/// Absolute tolerance on face residuals.
pub const FACE_TOL: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-14;
const MAX_CONDITION: f64 = 1e12;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `det(a, b)` with `a`, `b` as columns.
#[inline]
pub fn det2(a: &Vec2, b: &Vec2) -> f64 {
    cross(a, b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    /// Unit inward normal.
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Vec2, offset: f64) -> Self {
        Self { normal, offset }
    }

    #[inline]
    pub fn eval(&self, x: &Vec2) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Debug)]
pub struct FaceValues {
    pub values: Vec<f64>,
    pub containment: Containment,
}

impl FaceValues {
    pub fn inside(&self) -> bool {
        self.containment == Containment::Inside
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFrame {
    pub index: usize,
    pub origin: Vec2,
    pub tangent: Vec2,
    pub length: f64,
    pub normal: Vec2,
}

impl EdgeFrame {
    /// Point at tangential parameter `t` and inward distance `s`.
    #[inline]
    pub fn point(&self, t: f64, s: f64) -> Vec2 {
        self.origin + self.tangent * t + self.normal * s
    }

    /// Inverse of [`EdgeFrame::point`].
    #[inline]
    pub fn coords(&self, x: &Vec2) -> (f64, f64) {
        let d = x - self.origin;
        (d.dot(&self.tangent), d.dot(&self.normal))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    /// Reject non-unit normals instead of normalizing them.
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct Polytope {
    faces: Vec<HalfPlane>,
    vertices: Vec<Vec2>,
    warnings: Vec<String>,
}

impl Polytope {
    /// Build from `(normal, offset)` pairs given in cyclic face order.
    pub fn new(faces: &[(Vec2, f64)], opts: BuildOptions) -> Result<Self> {
        let n = faces.len();
        if n < 3 {
            return Err(Error::Unbounded(format!(
                "{n} half-planes cannot bound a polygon"
            )));
        }
        let mut warnings = Vec::new();
        let mut planes = Vec::with_capacity(n);
        for (i, (normal, offset)) in faces.iter().enumerate() {
            let norm = normal.norm();
            if !norm.is_finite() || norm == 0.0 || !offset.is_finite() {
                return Err(Error::InvalidFace { index: i });
            }
            if (norm - 1.0).abs() > UNIT_TOL {
                if opts.strict {
                    return Err(Error::NonUnitNormal { index: i, norm });
                }
                let msg = format!("face {i}: normal of length {norm} normalized");
                warn!("{msg}");
                warnings.push(msg);
            }
            planes.push(HalfPlane::new(normal / norm, offset / norm));
        }

        // Positive spanning: every angular gap between sorted normals below pi.
        let mut angles: Vec<f64> = planes
            .iter()
            .map(|p| p.normal.y.atan2(p.normal.x))
            .collect();
        angles.sort_by(f64::total_cmp);
        let max_gap = (0..n)
            .map(|k| {
                let next = if k + 1 == n {
                    angles[0] + 2.0 * PI
                } else {
                    angles[k + 1]
                };
                next - angles[k]
            })
            .fold(0.0, f64::max);
        if max_gap >= PI - 1e-12 {
            return Err(Error::Unbounded(format!(
                "face normals leave an angular gap of {max_gap:.6} rad"
            )));
        }

        let turn = |a: &HalfPlane, b: &HalfPlane| {
            cross(&a.normal, &b.normal).atan2(a.normal.dot(&b.normal))
        };
        let total: f64 = (0..n).map(|i| turn(&planes[i], &planes[(i + 1) % n])).sum();
        if (total + 2.0 * PI).abs() < 1e-6 {
            let msg = "faces given clockwise; order reversed".to_string();
            warn!("{msg}");
            warnings.push(msg);
            planes.reverse();
        } else if (total - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::FaceOrder { index: 0 });
        }
        for i in 0..n {
            let t = turn(&planes[i], &planes[(i + 1) % n]);
            if t <= 0.0 {
                return Err(Error::FaceOrder { index: (i + 1) % n });
            }
        }

        let mut vertices = Vec::with_capacity(n);
        for i in 0..n {
            let a = planes[(i + n - 1) % n];
            let b = planes[i];
            let c = a.normal.dot(&b.normal).abs().min(1.0);
            let cond = ((1.0 + c) / (1.0 - c)).sqrt();
            if !(cond <= MAX_CONDITION) {
                return Err(Error::NearlyParallel {
                    a: (i + n - 1) % n,
                    b: i,
                    cond,
                });
            }
            let det = cross(&a.normal, &b.normal);
            let x = (a.offset * b.normal.y - b.offset * a.normal.y) / det;
            let y = (a.normal.x * b.offset - b.normal.x * a.offset) / det;
            vertices.push(Vec2::new(x, y));
        }

        let poly = Self {
            faces: planes,
            vertices,
            warnings,
        };
        poly.validate()?;
        Ok(poly)
    }

    fn validate(&self) -> Result<()> {
        let n = self.faces.len();
        let mut violated = None;
        for (i, v) in self.vertices.iter().enumerate() {
            for (j, f) in self.faces.iter().enumerate() {
                if j == i || j == (i + n - 1) % n {
                    continue;
                }
                if f.eval(v) <= FACE_TOL {
                    violated = Some(j);
                    break;
                }
            }
            if violated.is_some() {
                break;
            }
        }
        if let Some(j) = violated {
            // Distinguish an empty intersection from a redundant face.
            let r = self
                .faces
                .iter()
                .map(|f| f.offset.abs())
                .fold(1.0, f64::max)
                * 1e3;
            let mut poly = ConvexPolygon::from_box(Vec2::new(-r, -r), Vec2::new(r, r));
            for (k, f) in self.faces.iter().enumerate() {
                poly.clip(&Constraint::new(-f.normal, -f.offset, k));
            }
            if poly.area() <= FACE_TOL {
                return Err(Error::EmptyInterior);
            }
            return Err(Error::FaceOrder { index: j });
        }
        if self.area() <= FACE_TOL {
            return Err(Error::EmptyInterior);
        }
        let c = self.centroid();
        if self.faces.iter().any(|f| f.eval(&c) <= 0.0) {
            return Err(Error::EmptyInterior);
        }
        Ok(())
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(
            &[
                (Vec2::new(1.0, 0.0), x0),
                (Vec2::new(0.0, 1.0), y0),
                (Vec2::new(-1.0, 0.0), -x1),
                (Vec2::new(0.0, -1.0), -y1),
            ],
            BuildOptions::default(),
        )
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square")
    }

    /// Convex polygon from counterclockwise vertices.
    pub fn from_vertices(points: &[Vec2]) -> Result<Self> {
        let n = points.len();
        let mut faces = Vec::with_capacity(n);
        for i in 0..n {
            let a = points[i];
            let b = points[(i + 1) % n];
            let t = b - a;
            let len = t.norm();
            if len == 0.0 {
                return Err(Error::InvalidFace { index: i });
            }
            let normal = Vec2::new(-t.y, t.x) / len;
            faces.push((normal, normal.dot(&a)));
        }
        Self::new(&faces, BuildOptions::default())
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn faces(&self) -> &[HalfPlane] {
        &self.faces
    }

    pub fn face(&self, i: usize) -> &HalfPlane {
        &self.faces[i % self.faces.len()]
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i % self.vertices.len()]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Face values `l_1(x), ..., l_N(x)` and containment.
    pub fn eval_faces(&self, x: &Vec2) -> FaceValues {
        let values: Vec<f64> = self.faces.iter().map(|f| f.eval(x)).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let containment = if min > FACE_TOL {
            Containment::Inside
        } else if min >= -FACE_TOL {
            Containment::Boundary
        } else {
            Containment::Outside
        };
        FaceValues {
            values,
            containment,
        }
    }

    #[inline]
    pub fn min_face(&self, x: &Vec2) -> f64 {
        self.faces
            .iter()
            .map(|f| f.eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn contains(&self, x: &Vec2) -> bool {
        self.min_face(x) > 0.0
    }

    pub fn face_product(&self, x: &Vec2) -> f64 {
        self.faces.iter().map(|f| f.eval(x)).product()
    }

    pub fn edge_frame(&self, i: usize) -> Result<EdgeFrame> {
        let n = self.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let origin = self.vertices[i];
        let end = self.vertices[(i + 1) % n];
        let normal = self.faces[i].normal;
        let tangent = Vec2::new(normal.y, -normal.x);
        Ok(EdgeFrame {
            index: i,
            origin,
            tangent,
            length: (end - origin).norm(),
            normal,
        })
    }

    pub fn edge_frames(&self) -> Vec<EdgeFrame> {
        (0..self.len())
            .map(|i| self.edge_frame(i).expect("index in range"))
            .collect()
    }

    pub fn area(&self) -> f64 {
        crate::polygon::shoelace(&self.vertices)
    }

    pub fn centroid(&self) -> Vec2 {
        ConvexPolygon::from_vertices(self.vertices.clone(), (0..self.len()).collect()).centroid()
    }

    pub fn as_polygon(&self) -> ConvexPolygon {
        ConvexPolygon::from_vertices(self.vertices.clone(), (0..self.len()).collect())
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Interior angle at each vertex.
    pub fn interior_angles(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let a = self.faces[(i + n - 1) % n].normal;
                let b = self.faces[i].normal;
                PI - cross(&a, &b).atan2(a.dot(&b))
            })
            .collect()
    }

    /// `det(n_{k-1}, n_k)`.
    pub fn corner_det(&self, k: usize) -> f64 {
        let n = self.len();
        det2(&self.faces[(k + n - 1) % n].normal, &self.faces[k % n].normal)
    }

    /// Nearest point of the boundary and its distance.
    pub fn project_to_boundary(&self, x: &Vec2) -> (Vec2, f64) {
        let mut best = (self.vertices[0], f64::INFINITY);
        for frame in self.edge_frames() {
            let (t, _) = frame.coords(x);
            let p = frame.point(t.clamp(0.0, frame.length), 0.0);
            let d = (p - x).norm();
            if d < best.1 {
                best = (p, d);
            }
        }
        best
    }

    /// Same polygon after `x -> R x + shift`, `R` the rotation by `angle`.
    pub fn transformed(&self, angle: f64, shift: Vec2) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let faces: Vec<(Vec2, f64)> = self
            .faces
            .iter()
            .map(|f| {
                let n = Vec2::new(c * f.normal.x - s * f.normal.y, s * f.normal.x + c * f.normal.y);
                (n, f.offset + n.dot(&shift))
            })
            .collect();
        Self::new(&faces, BuildOptions { strict: false })
    }
}
