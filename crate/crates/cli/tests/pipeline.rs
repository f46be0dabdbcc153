use std::fs;
use std::path::Path;
use std::process::Command;

use guillemin_cli::output::{self, ARTIFACTS};
use guillemin_cli::{parse_config, run_pipeline, PipelineError, RunConfig, Stage};

const SQUARE: &str = r#"
h = "1"
alpha = [0, 0, 0, 0]
[polytope]
faces = [[1, 0, 0], [0, 1, 0], [-1, 0, -1], [0, -1, -1]]
"#;

fn config(text: &str, out: &Path, resolution: usize) -> RunConfig {
    let mut cfg = parse_config(text).unwrap();
    cfg.output = out.to_path_buf();
    cfg.grid.resolution = resolution;
    cfg
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn square_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&config(SQUARE, dir.path(), 128), Stage::Diagnose).unwrap();
    for name in ARTIFACTS {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    for name in [
        "compat.max_deviation",
        "edges.trace_error",
        "solve.max_residual",
        "solve.mass_balance",
        "solve.sup_error",
        "transform.involution",
        "expand.hat1_dev",
        "diagnose.barrier_max_phi_tt",
        "diagnose.model_max_principle",
    ] {
        let c = report.check(name).unwrap_or_else(|| panic!("{name} not reported"));
        assert!(c.pass, "{c:?}");
    }
    let (header, rows) = read_csv(&dir.path().join(output::EXPANSION));
    assert_eq!(header, ["p", "uhat1", "u1", "uhat2", "u2", "uhat3", "u3", "residual"]);
    let n = rows.len();
    for row in &rows[n / 4..n - n / 4] {
        let uhat1: f64 = row[1].parse().unwrap();
        assert!((uhat1 + 1.0).abs() < 0.05, "{uhat1}");
    }
    let text = fs::read_to_string(dir.path().join(output::REPORT)).unwrap();
    assert!(text.contains("PASS solve.sup_error"), "{text}");
    assert!(text.contains("# effective configuration"));
}

#[test]
fn incompatible_h_stops_at_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = SQUARE.replace("h = \"1\"", "h = \"2\"");
    let err = run_pipeline(&config(&text, dir.path(), 32), Stage::Diagnose).unwrap_err();
    assert!(matches!(err, PipelineError::Incompatible(_)), "{err}");
    assert_eq!(err.stage(), Stage::Check);
    assert!(err.to_string().contains("vertex 0: h = 2, required 1"), "{err}");
    let (_, rows) = read_csv(&dir.path().join(output::COMPAT));
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row[5].parse::<f64>().unwrap(), 1.0);
        assert_eq!(row[6], "false");
    }
    assert!(!dir.path().join(output::EDGES).exists());
    let report = fs::read_to_string(dir.path().join(output::REPORT)).unwrap();
    assert!(report.contains("result FAILED: check stage"), "{report}");
}

#[test]
fn nonpositive_h_is_screened() {
    let dir = tempfile::tempdir().unwrap();
    let text = SQUARE.replace("h = \"1\"", "h = \"x - 2\"");
    let err = run_pipeline(&config(&text, dir.path(), 32), Stage::Diagnose).unwrap_err();
    assert_eq!(err.stage(), Stage::Check);
    assert!(err.to_string().starts_with("check stage:"), "{err}");
}

#[test]
fn generic_dirichlet_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
mode = "generic-dirichlet"
[polytope]
faces = [[1, 0, 0], [0, 1, 0], [-1, 0, -1], [0, -1, -1]]
[generic]
trace = "(x^2 + y^2) / 2"
phi = "1"
exact = "(x^2 + y^2) / 2"
"#;
    let report = run_pipeline(&config(text, dir.path(), 32), Stage::Solve).unwrap();
    let err = report.check("solve.sup_error").unwrap();
    assert!(err.value < 5e-3, "{err:?}");
    assert!(report.check("compat.max_deviation").is_none());
    for name in [output::COMPAT, output::EDGES] {
        let (header, rows) = read_csv(&dir.path().join(name));
        assert!(!header.is_empty());
        assert!(rows.is_empty());
    }
    assert!(!dir.path().join(output::PLT).exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&config(SQUARE, a.path(), 64), Stage::Diagnose).unwrap();
    run_pipeline(&config(SQUARE, b.path(), 64), Stage::Diagnose).unwrap();
    for name in &ARTIFACTS[..ARTIFACTS.len() - 1] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn stages_are_prefixes() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&config(SQUARE, dir.path(), 16), Stage::Edges).unwrap();
    assert_eq!(report.completed, [Stage::Check, Stage::Edges]);
    assert!(dir.path().join(output::EDGES).exists());
    assert!(!dir.path().join(output::SOLUTION).exists());
    let (header, rows) = read_csv(&dir.path().join(output::EDGES));
    assert_eq!(header, ["edge", "t", "value", "d2value"]);
    assert_eq!(rows.len(), 4 * 63);
}

fn guillemin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_guillemin")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    fs::write(&cfg, SQUARE).unwrap();
    let ok = guillemin(&["check", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS compat.max_deviation"));
    assert!(!out.join(output::EDGES).exists());

    let stalled = format!("{SQUARE}\n[solver]\nmax_iter = 1\n");
    fs::write(&cfg, stalled).unwrap();
    let fail = guillemin(&["--config", cfg.to_str().unwrap(), "--out", out_s, "--stage", "solve", "--resolution", "16"]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stderr).contains("solve stage"), "{}", String::from_utf8_lossy(&fail.stderr));

    fs::write(&cfg, SQUARE.replace("[0, 0, 0, 0]", "[0, 0, 0]")).unwrap();
    let bad = guillemin(&["all", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("alpha: expected 4, got 3"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
