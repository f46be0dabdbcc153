//! Subdifferential polygons of piecewise-linear convex functions.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::polygon::{Constraint, ConvexPolygon, BOX_OWNER};

/// Subgradient cell of node `i`, with the edge lengths and owners needed for
/// the Jacobian of its area.
#[derive(Clone, Debug)]
pub struct Cell {
    pub polygon: ConvexPolygon,
    pub area: f64,
}

impl Cell {
    /// `(j, length of the edge owned by j / |x_j - x_i|)`.
    pub fn weights<'a>(&'a self, points: &'a [Vec2], i: usize) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.polygon
            .edges()
            .filter(|&(o, len)| o != BOX_OWNER && len > 0.0)
            .map(move |(j, len)| (j, len / (points[j] - points[i]).norm()))
    }
}

/// `{p : p . (x_j - x_i) <= u_j - u_i for j in candidates}`.
///
/// Returns an empty polygon when `x_i` is not an extreme point of the lower
/// envelope of the candidates, and [`Error::UnboundedCell`] when the
/// candidates do not surround `x_i`.
pub fn subgradient_cell(points: &[Vec2], values: &[f64], i: usize, candidates: &[usize]) -> Result<Cell> {
    let xi = points[i];
    let ui = values[i];
    let mut slope: f64 = 0.0;
    for &j in candidates {
        let d = (points[j] - xi).norm();
        if d > 0.0 {
            slope = slope.max((values[j] - ui).abs() / d);
        }
    }
    let mut bound = 16.0 * slope + 1.0;
    for _ in 0..4 {
        let mut poly = ConvexPolygon::from_box(Vec2::new(-bound, -bound), Vec2::new(bound, bound));
        for &j in candidates {
            if j == i {
                continue;
            }
            poly.clip(&Constraint::new(points[j] - xi, values[j] - ui, j));
            if poly.is_empty() {
                return Ok(Cell {
                    polygon: poly,
                    area: 0.0,
                });
            }
        }
        if !poly.touches_box() {
            poly.refine(|j| (j != BOX_OWNER).then(|| Constraint::new(points[j] - xi, values[j] - ui, j)));
            let area = poly.area().max(0.0);
            return Ok(Cell { polygon: poly, area });
        }
        bound *= 1e3;
    }
    Err(Error::UnboundedCell { node: i })
}
