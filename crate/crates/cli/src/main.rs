use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use guillemin_cli::{parse_config, run_pipeline, Stage};

#[derive(Parser)]
#[command(name = "guillemin", version, about = "Monge-Ampere solutions with Guillemin boundary behavior")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Last stage to run; same as the subcommand.
    #[arg(long, global = true)]
    stage: Option<Stage>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid resolution (overrides `grid.resolution`).
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Vertex compatibility of h.
    Check,
    /// Boundary traces from the edge ODEs.
    Edges,
    /// Discrete Monge-Ampere solve.
    Solve,
    /// Partial Legendre transform near an edge.
    Transform,
    /// Boundary expansion fit.
    Expand,
    /// Concavity, Hoelder and boundary attainment diagnostics.
    Diagnose,
    /// Every stage.
    All,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Check => Stage::Check,
            Command::Edges => Stage::Edges,
            Command::Solve => Stage::Solve,
            Command::Transform => Stage::Transform,
            Command::Expand => Stage::Expand,
            Command::Diagnose | Command::All => Stage::Diagnose,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(path) = cli.config else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(out) = cli.out {
        cfg.output = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.resolution {
        if n < 8 {
            eprintln!("error: --resolution must be >= 8, got {n}");
            return ExitCode::from(2);
        }
        cfg.grid.resolution = n;
    }
    let until = cli
        .stage
        .or(cli.command.map(Command::stage))
        .unwrap_or(Stage::Diagnose);
    match run_pipeline(&cfg, until) {
        Ok(report) => {
            print!("{}", report.render());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
