//! Alexandroff solutions of `det D^2 u = 1 / phi` with Dirichlet data.
//!
//! Nodes carry masses `c_i`; the discrete equation asks the subgradient cell
//! of every interior node to have area `c_i / phi(x_i)`, which is the
//! discrete form of `phi dmu(u) = dx`.

pub mod cell;
pub mod grid;
pub mod solve;

pub use cell::{subgradient_cell, Cell};
pub use grid::{build_grid, grading_map, GridSpec, NodeSet, TensorGrid};
pub use solve::{
    boundary_values, check_boundary_convexity, ma_residual, op_solve, solution_rows, solve_on_nodes,
    DiscreteConvexFn, MAProblem, Method, ResidualReport, SolveReport, SolverOptions, Weight,
};
