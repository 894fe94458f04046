//! `schottkydim`: Hausdorff dimensions of Schottky limit sets and tree
//! boundaries, kernel realizations, and the degeneration sweep.
//!
//! Exit codes: 0 success, 2 invalid config, 3 numeric failure (or a failed
//! `check`), 1 i/o error.

mod check;
mod config;
mod error;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::*;
use crate::error::CliError;
use crate::output::{json_artifact, write_all, Artifact, Header};

#[derive(Debug, Parser)]
#[command(name = "schottkydim", version, about = "Hausdorff dimension of Schottky limit sets and tree boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON descriptor for the command.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output path prefix; suffixes such as `.json` or `_depth.csv` are appended.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Overrides the depth of the config.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Overrides the tolerance of the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, env = "SCHOTTKYDIM_THREADS")]
    threads: Option<usize>,
    /// Record wall-clock time in JSON headers. Outputs are then no longer
    /// reproducible byte for byte.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Critical exponent of a Schottky group (pressure or box counting).
    Dim,
    /// Critical exponent of a free action on a metric tree.
    TreeDim,
    /// Headline sweep of the three-circle family with the alignment schedule.
    McmullenSweep,
    /// Realize a kernel as points in the hyperboloid.
    Embed,
    /// Align a lifted subtree with the tree-kernel realization.
    Align,
    /// Critical exponent along a deformation.
    ProbeContinuity,
    /// Seeded invariant suite.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dim => "dim",
            Command::TreeDim => "tree-dim",
            Command::McmullenSweep => "mcmullen-sweep",
            Command::Embed => "embed",
            Command::Align => "align",
            Command::ProbeContinuity => "probe-continuity",
            Command::Check => "check",
        }
    }
}

fn read_config<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--input is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn effective<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).expect("configs serialize")
}

/// Parses the config, applies flag overrides, and runs the command.
fn execute(cli: &Cli) -> Result<(serde_json::Value, Vec<Artifact>, bool), CliError> {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Config(format!("--tol {t} outside (0, 1)")));
        }
    }
    let input = cli.input.as_deref();
    let ok = |cfg: serde_json::Value, a: Vec<Artifact>| Ok((cfg, a, true));
    match cli.command {
        Command::Dim => {
            let mut cfg: DimConfig = read_config(input)?;
            cfg.depth = cli.depth.or(cfg.depth);
            cfg.tol = cli.tol.or(cfg.tol);
            ok(effective(&cfg), run::dim(&cfg)?)
        }
        Command::TreeDim => {
            let mut cfg: TreeDimConfig = read_config(input)?;
            cfg.depth = cli.depth.or(cfg.depth);
            cfg.tol = cli.tol.or(cfg.tol);
            ok(effective(&cfg), run::tree_dim(&cfg)?)
        }
        Command::McmullenSweep => {
            let mut cfg: SweepConfig = read_config(input)?;
            cfg.depth = cli.depth.or(cfg.depth);
            cfg.tol = cli.tol.or(cfg.tol);
            ok(effective(&cfg), run::sweep(&cfg)?)
        }
        Command::Embed => {
            let cfg: EmbedConfig = read_config(input)?;
            ok(effective(&cfg), run::embed(&cfg)?)
        }
        Command::Align => {
            let mut cfg: AlignConfig = read_config(input)?;
            cfg.tol = cli.tol.or(cfg.tol);
            ok(effective(&cfg), run::align_cmd(&cfg)?)
        }
        Command::ProbeContinuity => {
            let mut cfg: ProbeConfig = read_config(input)?;
            cfg.depth = cli.depth.or(cfg.depth);
            cfg.tol = cli.tol.or(cfg.tol);
            ok(effective(&cfg), run::probe(&cfg, cli.seed)?)
        }
        Command::Check => {
            let cfg: CheckConfig = match input {
                Some(_) => read_config(input)?,
                None => CheckConfig::default(),
            };
            let report = check::check(&cfg, cli.seed);
            for row in report.geometry.iter().chain(&report.kernels) {
                let mark = if row.passed { "PASS" } else { "FAIL" };
                println!(
                    "{mark} {:<30} trials {:>6}  skipped {:>5}  failures {:>5}  worst {:.3e}  tol {:.0e}",
                    row.name, row.trials, row.skipped, row.failures, row.worst, row.tol
                );
            }
            let passed = report.passed();
            Ok((effective(&cfg), vec![json_artifact(".json", &report)], passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let name = cli.command.name();
    let result = execute(&cli).and_then(|(cfg, artifacts, passed)| {
        let header = Header::new(name, &cfg, cli.seed);
        let prefix = cli.output.clone().unwrap_or_else(|| PathBuf::from(format!("schottkydim-{name}")));
        let ms = cli.timing.then(|| start.elapsed().as_millis());
        for p in write_all(&prefix, &header, &artifacts, ms)? {
            eprintln!("wrote {}", p.display());
        }
        Ok(passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check: some invariants failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
