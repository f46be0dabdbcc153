//! Run configuration: one flat TOML file per run.

use std::path::PathBuf;

use guillemin_core::geometry::BuildOptions;
use guillemin_core::ma::Method;
use guillemin_core::{Polytope, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Guillemin,
    GenericDirichlet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Newton,
    Perron,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeConfig {
    /// `[n_x, n_y, offset]` per face, counterclockwise; `l = n . x - offset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<[f64; 3]>>,
    /// Alternatively, the vertices of a convex polygon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericConfig {
    /// Dirichlet data on the boundary.
    pub trace: Option<String>,
    /// Right-hand side weight; `h * prod l_i` when absent.
    pub phi: Option<String>,
    /// Known solution, for the error report.
    pub exact: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub resolution: usize,
    pub grading: f64,
    pub lump_boundary: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            grading: 0.5,
            lump_boundary: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: MethodName,
    pub tol: f64,
    pub max_iter: usize,
    pub edge_degree: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: MethodName::Newton,
            tol: 1e-6,
            max_iter: 500,
            edge_degree: 32,
        }
    }
}

impl SolverConfig {
    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Newton => Method::Newton,
            MethodName::Perron => Method::Perron,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// Zero-based edge; the first axis-parallel edge when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
    /// Window along the edge, as fractions of its length.
    pub along: [f64; 2],
    pub depth: f64,
    /// Rows below this height are left out of the equation residual.
    pub residual_y_min: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            edge: None,
            along: [0.3, 0.7],
            depth: 0.2,
            residual_y_min: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub eps: f64,
    pub resolution: usize,
    pub grading: f64,
    /// Boundary data `g(p, y)`; `x` stands for `p`.
    pub trace: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            resolution: 128,
            grading: 3.0,
            trace: "x^2/2 - xlogx(y)".into(),
            exact: Some("x^2/2 - xlogx(y)".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    pub order: usize,
    /// `[y_lo, y_hi]`; `[2 * first row, 0.1]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    pub tol: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            order: 3,
            window: None,
            tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub trials: usize,
    /// Defaults to 0.39 on quadrilaterals and `0.9 * 2 / (N + 1)` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_test: Option<f64>,
    pub holder_band: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            alpha_test: None,
            holder_band: 0.1,
        }
    }
}

fn default_h() -> String {
    "1".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_h")]
    pub h: String,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub polytope: PolytopeConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub generic: GenericConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl RunConfig {
    pub fn build_polytope(&self) -> Result<Polytope, ConfigError> {
        let p = &self.polytope;
        let built = match (&p.faces, &p.vertices) {
            (Some(faces), None) => {
                let faces: Vec<(Vec2, f64)> = faces.iter().map(|f| (Vec2::new(f[0], f[1]), f[2])).collect();
                Polytope::new(&faces, BuildOptions::default())
            }
            (None, Some(vs)) => {
                let vs: Vec<Vec2> = vs.iter().map(|v| Vec2::new(v[0], v[1])).collect();
                Polytope::from_vertices(&vs)
            }
            _ => return Err(invalid("polytope", "give exactly one of `faces` or `vertices`")),
        };
        built.map_err(|e| invalid("polytope", e.to_string()))
    }

    /// Effective configuration, defaults included.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# could not serialise config: {e}\n"))
    }

    fn validate(&mut self) -> Result<(), ConfigError> {
        let n = self.build_polytope()?.len();
        match self.mode {
            Mode::Guillemin => {
                if self.alpha.len() != n {
                    return Err(invalid(
                        "alpha",
                        format!("expected {n}, got {}", self.alpha.len()),
                    ));
                }
            }
            Mode::GenericDirichlet => {
                if self.generic.trace.is_none() {
                    return Err(invalid("generic.trace", "required in generic-dirichlet mode"));
                }
                if !self.alpha.is_empty() && self.alpha.len() != n {
                    return Err(invalid(
                        "alpha",
                        format!("expected {n}, got {}", self.alpha.len()),
                    ));
                }
            }
        }
        if self.grid.resolution < 8 {
            return Err(invalid("grid.resolution", format!("must be >= 8, got {}", self.grid.resolution)));
        }
        if !(self.grid.grading > 0.0 && self.grid.grading <= 1.0) {
            return Err(invalid("grid.grading", "must lie in (0, 1]"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(invalid("solver.tol", "must be > 0"));
        }
        if !(self.model.eps > 0.0) {
            return Err(invalid("model.eps", format!("must be > 0, got {}", self.model.eps)));
        }
        if self.model.resolution < 8 {
            return Err(invalid("model.resolution", "must be >= 8"));
        }
        let [a, b] = self.transform.along;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(invalid("transform.along", "need 0 < start < end < 1"));
        }
        if !(self.transform.depth > 0.0) {
            return Err(invalid("transform.depth", "must be > 0"));
        }
        if !(1..=5).contains(&self.expansion.order) {
            return Err(invalid("expansion.order", "must lie in 1..=5"));
        }
        if let Some([lo, hi]) = self.expansion.window {
            if !(0.0 < lo && lo < hi) {
                return Err(invalid("expansion.window", "need 0 < y_lo < y_hi"));
            }
        }
        if let Some(e) = self.transform.edge {
            if e >= n {
                return Err(invalid("transform.edge", format!("{e} out of range for {n} edges")));
            }
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
