//! Stage orchestration: check -> edges -> solve -> transform -> expand -> diagnose.
//!
//! Each stage writes its artifact before the next one starts, so a failed run
//! leaves the artifacts of every completed stage plus a run report naming the
//! stage that failed.

use std::fmt;
use std::str::FromStr;

use guillemin_core::compat::{check_h, guillemin_h, guillemin_potential, screen_h};
use guillemin_core::diagnostics::{barrier_concavity, default_alpha_test, envelope_check, holder_exponent};
use guillemin_core::edge_ode::{solve_all_edges, trace_rows};
use guillemin_core::expansion::{default_window, edge_h, fit_expansion, verify_log_coefficients};
use guillemin_core::legendre::{
    involution_error, max_principle_gaps, model_solve, pl_residual, plt_forward, sample_near_edge, DegenerateProblem,
    EdgeWindow, ModelGrid, PLTGrid,
};
use guillemin_core::ma::{ma_residual, op_solve, solution_rows, DiscreteConvexFn, GridSpec, MAProblem, SolverOptions, Weight};
use guillemin_core::{BoundaryData, Polytope, ScalarField, Vec2};
use log::info;
use thiserror::Error;

use crate::config::{Mode, RunConfig};
use crate::output::{self, floats, Cell, OutputDir};

/// Relative tolerance of the vertex compatibility check.
pub const COMPAT_TOL: f64 = 1e-9;
/// Samples per edge in `edge_traces.csv`.
pub const TRACE_SAMPLES: usize = 64;
/// Exact-solution error is measured on `{min l_i >= ERROR_BAND}`.
pub const ERROR_BAND: f64 = 0.1;
/// Residuals below this are round-off; no convergence order is read from them.
pub const ROUND_OFF: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Check,
    Edges,
    Solve,
    Transform,
    Expand,
    Diagnose,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Check,
        Stage::Edges,
        Stage::Solve,
        Stage::Transform,
        Stage::Expand,
        Stage::Diagnose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Check => "check",
            Stage::Edges => "edges",
            Stage::Solve => "solve",
            Stage::Transform => "transform",
            Stage::Expand => "expand",
            Stage::Diagnose => "diagnose",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    /// Stage names; `all` is the last stage.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Stage::Diagnose);
        }
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}` (expected check, edges, solve, transform, expand, diagnose or all)"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: guillemin_core::Error,
    },
    #[error("check stage: h is incompatible with the polytope: {0}")]
    Incompatible(String),
    #[error("{stage} stage: cannot write output: {source}")]
    Io {
        stage: Stage,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Stage { stage, .. } | PipelineError::Io { stage, .. } => *stage,
            PipelineError::Incompatible(_) => Stage::Check,
        }
    }
}

/// One measured property: passes when `value` is on the right side of
/// `threshold` (decided by the stage that measured it).
#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub stage: Stage,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub completed: Vec<Stage>,
    pub checks: Vec<CheckLine>,
    pub notes: Vec<String>,
    pub failure: Option<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s += &format!(
                "{:4} {:<28} value {:>24}  threshold {:>24}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                output::float(c.value),
                output::float(c.threshold)
            );
        }
        for n in &self.notes {
            s += &format!("note {n}\n");
        }
        let done: Vec<&str> = self.completed.iter().map(|s| s.name()).collect();
        s += &format!("stages {}\n", done.join(" "));
        match &self.failure {
            Some(f) => s += &format!("result FAILED: {f}\n"),
            None if self.passed() => s += "result PASS\n",
            None => {
                let n = self.checks.iter().filter(|c| !c.pass).count();
                s += &format!("result {n} check(s) failed\n");
            }
        }
        s
    }

    fn push(&mut self, stage: Stage, name: &str, value: f64, threshold: f64, pass: bool) {
        info!("{name} = {value:e} (threshold {threshold:e}): {}", if pass { "pass" } else { "FAIL" });
        self.checks.push(CheckLine {
            stage,
            name: name.to_string(),
            value,
            threshold,
            pass,
        });
    }

    /// `value <= threshold`.
    fn at_most(&mut self, stage: Stage, name: &str, value: f64, threshold: f64) {
        self.push(stage, name, value, threshold, value <= threshold);
    }

    /// `value >= threshold`.
    fn at_least(&mut self, stage: Stage, name: &str, value: f64, threshold: f64) {
        self.push(stage, name, value, threshold, value >= threshold);
    }
}

/// Runs every stage up to and including `until`, writing artifacts into
/// `cfg.output`. The run report is written whether or not a stage fails.
pub fn run_pipeline(cfg: &RunConfig, until: Stage) -> Result<RunReport, PipelineError> {
    let out = OutputDir::create(&cfg.output).map_err(|source| PipelineError::Io {
        stage: Stage::Check,
        source,
    })?;
    let mut run = Run::new(cfg, out);
    let result = run.all(until);
    if let Err(e) = &result {
        run.report.failure = Some(e.to_string());
    }
    let text = format!("{}\n# effective configuration\n{}", run.report.render(), cfg.echo());
    run.out
        .write_text(output::REPORT, &text)
        .map_err(|source| PipelineError::Io {
            stage: until,
            source,
        })?;
    result.map(|_| run.report)
}

/// The same problem solved at two resolutions.
struct Solved {
    fine: DiscreteConvexFn,
    coarse: Option<DiscreteConvexFn>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    out: OutputDir,
    report: RunReport,
    polytope: Option<Polytope>,
    h: Option<ScalarField>,
    boundary: Option<BoundaryData>,
    weight: Option<Weight>,
    /// Known solution on the polytope.
    exact: Option<Exact>,
    solved: Option<Solved>,
    edge: Option<usize>,
    star: Option<PLTGrid>,
}

enum Exact {
    Guillemin,
    Field(ScalarField),
}

fn core(stage: Stage) -> impl Fn(guillemin_core::Error) -> PipelineError {
    move |source| PipelineError::Stage { stage, source }
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, out: OutputDir) -> Self {
        Self {
            cfg,
            out,
            report: RunReport::default(),
            polytope: None,
            h: None,
            boundary: None,
            weight: None,
            exact: None,
            solved: None,
            edge: None,
            star: None,
        }
    }

    fn all(&mut self, until: Stage) -> Result<(), PipelineError> {
        for stage in Stage::ALL.into_iter().filter(|&s| s <= until) {
            info!("stage {stage}");
            match stage {
                Stage::Check => self.check()?,
                Stage::Edges => self.edges()?,
                Stage::Solve => self.solve()?,
                Stage::Transform => self.transform()?,
                Stage::Expand => self.expand()?,
                Stage::Diagnose => self.diagnose()?,
            }
            self.report.completed.push(stage);
        }
        Ok(())
    }

    fn csv(&self, stage: Stage, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), PipelineError> {
        self.out
            .write_csv(name, header, rows)
            .map_err(|source| PipelineError::Io { stage, source })
    }

    fn polytope(&self) -> &Polytope {
        self.polytope.as_ref().expect("check stage ran")
    }

    fn check(&mut self) -> Result<(), PipelineError> {
        const S: Stage = Stage::Check;
        let err = core(S);
        let polytope = self.cfg.build_polytope().map_err(|e| PipelineError::Stage {
            stage: S,
            source: guillemin_core::Error::InvalidArgument(e.to_string()),
        })?;
        for w in polytope.warnings() {
            self.report.notes.push(format!("polytope: {w}"));
        }
        let h = ScalarField::parse("h", &self.cfg.h, Some(&polytope)).map_err(&err)?;
        let header = ["vertex", "x", "y", "h", "required", "deviation", "pass"];
        match self.cfg.mode {
            Mode::Guillemin => {
                screen_h(&polytope, &h).map_err(&err)?;
                let rep = check_h(&polytope, &h, COMPAT_TOL).map_err(&err)?;
                let rows: Vec<Vec<Cell>> = rep
                    .vertices
                    .iter()
                    .map(|v| {
                        let x = polytope.vertex(v.vertex);
                        vec![
                            Cell::I(v.vertex),
                            Cell::F(x.x),
                            Cell::F(x.y),
                            Cell::F(v.value),
                            Cell::F(v.required),
                            Cell::F(v.deviation),
                            Cell::B(v.pass),
                        ]
                    })
                    .collect();
                self.csv(S, output::COMPAT, &header, &rows)?;
                self.report.at_most(S, "compat.max_deviation", rep.max_deviation(), COMPAT_TOL);
                if !rep.pass() {
                    let detail: Vec<String> = rep
                        .vertices
                        .iter()
                        .filter(|v| !v.pass)
                        .map(|v| {
                            format!(
                                "vertex {}: h = {}, required {}, deviation {:.3e}",
                                v.vertex, v.value, v.required, v.deviation
                            )
                        })
                        .collect();
                    return Err(PipelineError::Incompatible(detail.join("; ")));
                }
                if is_guillemin_oracle(&polytope, &h, &self.cfg.alpha) {
                    self.exact = Some(Exact::Guillemin);
                    self.report.notes.push("data match u_G = sum l_i log l_i; errors are measured against it".into());
                }
                self.weight = Some(Weight::Guillemin(h.clone()));
            }
            Mode::GenericDirichlet => {
                let g = &self.cfg.generic;
                let weight = match &g.phi {
                    Some(text) => {
                        let phi = ScalarField::parse("phi", text, Some(&polytope)).map_err(&err)?;
                        phi.screen(&polytope, 33, false).map_err(&err)?;
                        Weight::Phi(phi)
                    }
                    None => {
                        screen_h(&polytope, &h).map_err(&err)?;
                        Weight::Guillemin(h.clone())
                    }
                };
                if let Some(text) = &g.exact {
                    self.exact = Some(Exact::Field(ScalarField::parse("exact", text, Some(&polytope)).map_err(&err)?));
                }
                self.weight = Some(weight);
                self.csv(S, output::COMPAT, &header, &[])?;
                self.report.notes.push("compat skipped in generic-dirichlet mode".into());
            }
        }
        self.polytope = Some(polytope);
        self.h = Some(h);
        Ok(())
    }

    fn edges(&mut self) -> Result<(), PipelineError> {
        const S: Stage = Stage::Edges;
        let err = core(S);
        let header = ["edge", "t", "value", "d2value"];
        let p = self.polytope().clone();
        match self.cfg.mode {
            Mode::Guillemin => {
                let h = self.h.as_ref().expect("check stage ran");
                let traces = solve_all_edges(&p, h, &self.cfg.alpha, self.cfg.solver.edge_degree).map_err(&err)?;
                let rows = trace_rows(&traces, TRACE_SAMPLES).map_err(&err)?;
                let min_d2 = rows.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
                self.report.push(S, "edges.min_d2value", min_d2, 0.0, min_d2 > 0.0);
                if let Some(Exact::Guillemin) = self.exact {
                    let frames = p.edge_frames();
                    let dev = rows
                        .iter()
                        .map(|r| (r[2] - guillemin_potential(&p, &frames[r[0] as usize].point(r[1], 0.0))).abs())
                        .fold(0.0, f64::max);
                    self.report.at_most(S, "edges.trace_error", dev, 1e-9);
                }
                let cells: Vec<Vec<Cell>> = rows
                    .iter()
                    .map(|r| vec![Cell::I(r[0] as usize), Cell::F(r[1]), Cell::F(r[2]), Cell::F(r[3])])
                    .collect();
                self.csv(S, output::EDGES, &header, &cells)?;
                self.boundary = Some(BoundaryData::Traces(traces));
            }
            Mode::GenericDirichlet => {
                let text = self.cfg.generic.trace.as_deref().expect("validated");
                let g = ScalarField::parse("trace", text, Some(&p)).map_err(&err)?;
                self.csv(S, output::EDGES, &header, &[])?;
                self.boundary = Some(BoundaryData::Field(g));
            }
        }
        Ok(())
    }

    fn problem(&self, resolution: usize) -> MAProblem {
        let c = self.cfg;
        MAProblem {
            polytope: self.polytope().clone(),
            weight: self.weight.clone().expect("check stage ran"),
            boundary: self.boundary.clone().expect("edges stage ran"),
            grid: GridSpec {
                resolution,
                grading: c.grid.grading,
                lump_boundary: c.grid.lump_boundary,
            },
            options: SolverOptions {
                tol: c.solver.tol,
                max_iter: c.solver.max_iter,
                method: c.solver.method(),
                ..SolverOptions::default()
            },
        }
    }

    /// Sup error against the known solution: on `{min l >= ERROR_BAND}` for
    /// Guillemin data, over all interior nodes otherwise.
    fn solution_error(&self, u: &DiscreteConvexFn) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let p = self.polytope();
        let nodes = &u.nodes;
        let err = (0..nodes.n_interior)
            .filter_map(|i| {
                let x = nodes.points[i];
                let e = match exact {
                    Exact::Guillemin if p.min_face(&x) < ERROR_BAND => return None,
                    Exact::Guillemin => guillemin_potential(p, &x),
                    Exact::Field(f) => f.eval(&x),
                };
                Some((u.values[i] - e).abs())
            })
            .fold(0.0, f64::max);
        Some(err)
    }

    fn solve(&mut self) -> Result<(), PipelineError> {
        const S: Stage = Stage::Solve;
        let err = core(S);
        let n = self.cfg.grid.resolution;
        let (u, rep) = op_solve(&self.problem(n)).map_err(&err)?;
        info!("solved at {n}: {} iterations, residual {:e}", rep.iterations, rep.max_residual);
        let rows: Vec<Vec<Cell>> = solution_rows(&u).iter().map(|r| floats(r)).collect();
        self.csv(S, output::SOLUTION, &["x", "y", "u"], &rows)?;

        let res = ma_residual(&u, self.weight.as_ref().expect("check stage ran")).map_err(&err)?;
        let rows: Vec<Vec<Cell>> = res
            .relative
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let x = u.nodes.points[i];
                vec![Cell::I(i), Cell::F(x.x), Cell::F(x.y), Cell::F(u.nodes.mass[i]), Cell::F(*r)]
            })
            .collect();
        self.csv(S, output::RESIDUALS, &["node", "x", "y", "mass", "relative_residual"], &rows)?;
        self.report.at_most(S, "solve.max_residual", res.max, self.cfg.solver.tol);
        self.report.at_most(S, "solve.mass_balance", res.total_relative(), 1e-4);

        // The half-resolution solve feeds the refinement checks.
        let coarse = if n / 2 >= 8 {
            Some(op_solve(&self.problem(n / 2)).map_err(&err)?.0)
        } else {
            None
        };
        if let Some(e) = self.solution_error(&u) {
            self.report.at_most(S, "solve.sup_error", e, 5e-3);
            if let Some(c) = coarse.as_ref().and_then(|c| self.solution_error(c)) {
                self.report.at_least(S, "solve.error_contraction", c / e, 1.4);
            }
        }
        self.solved = Some(Solved { fine: u, coarse });
        Ok(())
    }

    fn window(&self, edge: usize) -> Result<EdgeWindow, PipelineError> {
        let frame = self
            .polytope()
            .edge_frame(edge)
            .map_err(core(Stage::Transform))?;
        let t = &self.cfg.transform;
        Ok(EdgeWindow {
            edge,
            t0: t.along[0] * frame.length,
            t1: t.along[1] * frame.length,
            depth: t.depth,
        })
    }

    fn transform(&mut self) -> Result<(), PipelineError> {
        const S: Stage = Stage::Transform;
        let err = core(S);
        let header = ["p", "y", "ustar"];
        let p = self.polytope().clone();
        let edge = match self.cfg.transform.edge {
            Some(e) => Some(e),
            None => p.edge_frames().iter().position(|f| f.tangent.x.abs().max(f.tangent.y.abs()) > 1.0 - 1e-12),
        };
        let Some(edge) = edge else {
            self.report.notes.push("transform skipped: no edge parallel to a coordinate axis".into());
            return self.csv(S, output::PLT, &header, &[]);
        };
        let window = self.window(edge)?;
        let solved = self.solved.as_ref().expect("solve stage ran");
        let rows = sample_near_edge(&solved.fine, &window).map_err(&err)?;
        let star = plt_forward(&rows).map_err(&err)?;
        let cells: Vec<Vec<Cell>> = star.csv_rows().iter().map(|r| floats(r)).collect();
        self.csv(S, output::PLT, &header, &cells)?;

        self.report.at_most(S, "transform.involution", involution_error(&rows).map_err(&err)?, 1e-3);
        let frame = p.edge_frame(edge).map_err(&err)?;
        let weight = self.weight.as_ref().expect("check stage ran");
        let phi = |x: f64, y: f64| weight.phi(&p, &frame.point(x, y));
        let y_min = self.cfg.transform.residual_y_min;
        let fine = pl_residual(&star, phi, y_min).map_err(&err)?;
        self.report.push(S, "transform.pl_residual", fine.sup, f64::INFINITY, fine.sup.is_finite());
        if let Some(coarse) = &solved.coarse {
            let rows = sample_near_edge(coarse, &window).map_err(&err)?;
            let r = pl_residual(&plt_forward(&rows).map_err(&err)?, phi, y_min).map_err(&err)?;
            if r.sup > ROUND_OFF {
                self.report.at_least(S, "transform.pl_residual_order", (r.sup / fine.sup).log2(), 1.0);
            } else {
                self.report
                    .notes
                    .push(format!("pl_residual at round-off level ({:.1e}); no order measured", r.sup));
            }
        }
        self.edge = Some(edge);
        self.star = Some(star);
        Ok(())
    }

    fn expand(&mut self) -> Result<(), PipelineError> {
        const S: Stage = Stage::Expand;
        let err = core(S);
        let order = self.cfg.expansion.order;
        let mut header = vec!["p".to_string()];
        for i in 1..=order {
            header.push(format!("uhat{i}"));
            header.push(format!("u{i}"));
        }
        header.push("residual".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let (Some(star), Some(edge)) = (&self.star, self.edge) else {
            self.report.notes.push("expand skipped: no transformed solution".into());
            return self.csv(S, output::EXPANSION, &header, &[]);
        };
        let window = self.cfg.expansion.window.map_or_else(|| default_window(star), |[a, b]| (a, b));
        let fit = fit_expansion(star, order, window).map_err(&err)?;
        let rows: Vec<Vec<Cell>> = fit.csv_rows().iter().map(|r| floats(r)).collect();
        self.csv(S, output::EXPANSION, &header, &rows)?;
        self.report.push(S, "expand.condition", fit.condition, guillemin_core::expansion::MAX_CONDITION, true);
        if self.cfg.mode == Mode::Guillemin && order >= 3 {
            let p = self.polytope();
            let h = self.h.as_ref().expect("check stage ran");
            let local = edge_h(p, h, edge).map_err(&err)?;
            let tol = self.cfg.expansion.tol;
            let rep = verify_log_coefficients(&fit, local, tol).map_err(&err)?;
            self.report.at_most(S, "expand.hat1_dev", rep.hat1_dev, tol);
            self.report.at_most(S, "expand.hat2_sup", rep.hat2_sup, tol);
            self.report.at_most(S, "expand.hat3_sup", rep.hat3_sup, tol);
            self.report.at_most(S, "expand.identity_dev", rep.identity_dev, tol);
        }
        Ok(())
    }

    fn diagnose(&mut self) -> Result<(), PipelineError> {
        const S: Stage = Stage::Diagnose;
        let err = core(S);
        let first = self.report.checks.len();
        let p = self.polytope().clone();
        let d = &self.cfg.diagnostics;
        let alpha = d.alpha_test.unwrap_or_else(|| default_alpha_test(p.len()));

        let conc = barrier_concavity(&p, alpha, d.trials, self.cfg.seed).map_err(&err)?;
        self.report.push(S, "diagnose.barrier_max_phi_tt", conc.max_phi_tt, 0.0, conc.strictly_concave());

        let solved = self.solved.as_ref().expect("solve stage ran");
        let fine = holder_exponent(&solved.fine, alpha, d.holder_band).map_err(&err)?;
        self.report
            .push(S, "diagnose.holder_seminorm", fine.seminorm, f64::INFINITY, fine.seminorm.is_finite());
        if let Some(c) = &solved.coarse {
            let coarse = holder_exponent(c, alpha, d.holder_band).map_err(&err)?;
            let ratio = fine.seminorm.max(coarse.seminorm) / fine.seminorm.min(coarse.seminorm);
            self.report.at_most(S, "diagnose.holder_ratio", ratio, 2.0);
        }

        let m = &self.cfg.model;
        let g = ScalarField::parse("model.trace", &m.trace, None).map_err(&err)?;
        let model_at = |n: usize| {
            let grid = ModelGrid {
                np: n,
                ny: n,
                grading: m.grading,
                ..ModelGrid::default()
            };
            model_solve(&DegenerateProblem::model(g.clone(), m.eps, grid))
        };
        let fine = model_at(m.resolution).map_err(&err)?;
        if let Some(text) = &m.exact {
            let exact = ScalarField::parse("model.exact", text, None).map_err(&err)?;
            let (np, ny) = (fine.ps.len(), fine.ys.len());
            let mut e = 0.0f64;
            for j in 1..ny - 1 {
                for i in 1..np - 1 {
                    e = e.max((fine.at(i, j) - exact.eval_xy(fine.ps[i], fine.ys[j])).abs());
                }
            }
            self.report.at_most(S, "diagnose.model_error", e, 1e-3);
        }
        let (above, below) = max_principle_gaps(&fine);
        self.report.at_most(S, "diagnose.model_max_principle", above.max(below), 0.0);
        let env = envelope_check(&fine, &g).map_err(&err)?;
        let excess = env.witness.as_ref().map_or(0.0, |w| w.excess);
        self.report.push(S, "diagnose.envelope_excess", excess, 0.0, env.contained);
        if m.resolution / 2 >= 8 {
            let coarse = envelope_check(&model_at(m.resolution / 2).map_err(&err)?, &g).map_err(&err)?;
            let ratio = env.d.max(coarse.d) / env.d.min(coarse.d);
            self.report.at_most(S, "diagnose.attainment_d_ratio", ratio, 2.0);
        }
        self.report.push(S, "diagnose.attainment_d", env.d, f64::INFINITY, env.d.is_finite());

        let rows: Vec<Vec<Cell>> = self.report.checks[first..]
            .iter()
            .map(|c| vec![Cell::S(c.name.clone()), Cell::F(c.value), Cell::F(c.threshold), Cell::B(c.pass)])
            .collect();
        self.csv(S, output::DIAGNOSTICS, &["check", "value", "threshold", "pass"], &rows)
    }
}

/// Whether `h` and `alpha` are the data of `u_G = sum l_i log l_i`.
fn is_guillemin_oracle(p: &Polytope, h: &ScalarField, alpha: &[f64]) -> bool {
    let hg = guillemin_h(p);
    let c = p.centroid();
    let probes: Vec<Vec2> = std::iter::once(c)
        .chain(p.vertices().iter().map(|v| c + (v - c) * 0.5))
        .collect();
    let h_ok = probes.iter().all(|x| {
        let (a, b) = (h.eval(x), hg.eval(x));
        (a - b).abs() <= 1e-10 * b.abs()
    });
    h_ok && alpha
        .iter()
        .enumerate()
        .all(|(i, a)| (a - guillemin_potential(p, &p.vertex(i))).abs() <= 1e-12)
}
