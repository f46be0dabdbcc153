//! CSV artifacts: fixed header row, floats with 17 significant digits.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const COMPAT: &str = "compat_report.csv";
pub const EDGES: &str = "edge_traces.csv";
pub const SOLUTION: &str = "solution.csv";
pub const RESIDUALS: &str = "residuals.csv";
pub const PLT: &str = "plt.csv";
pub const EXPANSION: &str = "expansion.csv";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const REPORT: &str = "run_report.txt";
pub const CONFIG_ECHO: &str = "config.toml";

/// Every artifact in the order it is written.
pub const ARTIFACTS: [&str; 8] = [COMPAT, EDGES, SOLUTION, RESIDUALS, PLT, EXPANSION, DIAGNOSTICS, REPORT];

/// Shortest text that round-trips losslessly in a fixed layout.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV cell.
#[derive(Clone, Debug)]
pub enum Cell {
    F(f64),
    I(usize),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => float(*v),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

pub fn floats(row: &[f64]) -> Vec<Cell> {
    row.iter().map(|&v| Cell::F(v)).collect()
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv<H: AsRef<str>>(&self, name: &str, header: &[H], rows: &[Vec<Cell>]) -> io::Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()
    }

    pub fn write_text(&self, name: &str, text: &str) -> io::Result<()> {
        fs::write(self.path(name), text)
    }
}
