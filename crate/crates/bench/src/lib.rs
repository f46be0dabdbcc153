//! Fixed problems shared by the benchmarks.

use guillemin_core::edge_ode::solve_all_edges;
use guillemin_core::legendre::{DegenerateProblem, ModelGrid};
use guillemin_core::ma::{GridSpec, MAProblem, SolverOptions, Weight};
use guillemin_core::{BoundaryData, Polytope, ScalarField};

/// Unit square, `h = 1`, zero vertex values: the solution is `sum l_i log l_i`.
pub fn square_problem(resolution: usize) -> MAProblem {
    let polytope = Polytope::unit_square();
    let h = ScalarField::constant("h", 1.0);
    let traces = solve_all_edges(&polytope, &h, &[0.0; 4], 32).expect("compatible data");
    MAProblem {
        polytope,
        weight: Weight::Guillemin(h),
        boundary: BoundaryData::Traces(traces),
        grid: GridSpec {
            resolution,
            ..GridSpec::default()
        },
        options: SolverOptions::default(),
    }
}

/// The edge on the `x` axis of the unit square.
pub fn bottom_edge(p: &Polytope) -> usize {
    (0..p.len())
        .find(|&i| {
            let f = p.edge_frame(i).expect("edge in range");
            f.origin.norm() < 1e-12 && f.tangent.x > 0.5
        })
        .expect("square has a bottom edge")
}

/// `u_pp + y u_yy = 0` with data `p^2/2 - y log y`.
pub fn model_problem(n: usize, eps: f64) -> DegenerateProblem {
    let g = ScalarField::parse("g", "x^2/2 - xlogx(y)", None).expect("valid expression");
    DegenerateProblem::model(
        g,
        eps,
        ModelGrid {
            np: n,
            ny: n,
            grading: 3.0,
            ..ModelGrid::default()
        },
    )
}
