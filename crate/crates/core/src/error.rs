use thiserror::Error;

use crate::geometry::Vec2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polytope is unbounded: {0}")]
    Unbounded(String),
    #[error("polytope has empty interior")]
    EmptyInterior,
    #[error("face {index} is redundant or out of cyclic order")]
    FaceOrder { index: usize },
    #[error("face {index} has a non-unit normal (|n| = {norm})")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("face {index} has an invalid normal")]
    InvalidFace { index: usize },
    #[error("faces {a} and {b} are nearly parallel (condition number {cond:.3e})")]
    NearlyParallel { a: usize, b: usize, cond: f64 },
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("expression syntax error at column {column}: {message}")]
    ExprSyntax { column: usize, message: String },
    #[error("field `{name}` is not positive at ({}, {}): value {value}", at.x, at.y)]
    NonPositiveField { name: String, at: Vec2, value: f64 },
    #[error("field `{name}` is not finite at ({}, {})", at.x, at.y)]
    NonFiniteField { name: String, at: Vec2 },

    #[error("edge {edge}: data incompatible at vertex {vertex}: {detail}")]
    IncompatibleData {
        edge: usize,
        vertex: usize,
        detail: String,
    },
    #[error("derivative of order {order} requested at the endpoint t = {t}")]
    EndpointDerivative { order: u8, t: f64 },
    #[error("parameter {t} outside [0, {len}]")]
    ParameterOutOfRange { t: f64, len: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid resolution {0} too small")]
    ResolutionTooSmall(usize),
    #[error("boundary data not convex along edge {edge} near t = {t}")]
    NonConvexTrace { edge: usize, t: f64 },
    #[error("subgradient cell of node {node} is unbounded")]
    UnboundedCell { node: usize },
    #[error("solver did not converge after {iterations} iterations (residuals: {history:?})")]
    NoConvergence {
        iterations: usize,
        history: Vec<f64>,
    },
    #[error("linear solver stagnated at relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("row {row}: discrete derivative not increasing (convexity failure)")]
    ConvexityFailure { row: usize },
    #[error("coefficient `a` not positive at ({p}, {y})")]
    NonPositiveCoefficient { p: f64, y: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("u*_p = {x} leaves the domain of phi at node ({p}, {y})")]
    OutsideDomain { p: f64, y: f64, x: f64 },
    #[error("ill-conditioned fit (condition {cond:.3e}); widen the window")]
    IllConditioned { cond: f64 },
    #[error("window touches a vertex: {0}")]
    WindowAtVertex(String),
    #[error("could not sample interior segments: {0}")]
    SegmentSampling(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
