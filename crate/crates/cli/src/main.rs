//! `hyperwalk`: verification suites, orbit experiments and data export.
//!
//! Settings come from built-in defaults, then `--config FILE` (`key = value`
//! lines), then flags. Reports are JSON; point clouds and tables are CSV.
//! With `--out PATH` the primary output goes to `PATH` and sidecars (measure,
//! Green table, trace) to `PATH` with the extension replaced; otherwise the
//! primary output goes to stdout and sidecars are not written.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 usage or
//! configuration error, 3 runtime error.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use hyperwalk::par::Exec;
use hyperwalk::Field;

use commands::{Command, CommandError};
use config::{read_config, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hyperwalk", version, about = "Hyperbolic geometry checks and lattice random-walk experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scalar field of the space.
    #[arg(long, value_parser = parse_field)]
    field: Option<Field>,
    /// Dimension k of H^k_F.
    #[arg(long)]
    dim: Option<usize>,
    /// Lattice fixture.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Instances, points or pairs, depending on the command.
    #[arg(long)]
    samples: Option<u64>,
    /// Discretization runs for ls-run and report.
    #[arg(long)]
    runs: Option<u64>,
    /// Bisector membership tolerance, or the Green tolerance for walk-green.
    #[arg(long)]
    tol: Option<f64>,
    /// Orbit truncation (word length).
    #[arg(long)]
    depth: Option<usize>,
    /// Green series horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Word-ball radius for the Green table.
    #[arg(long)]
    ball_radius: Option<usize>,
    /// Inner ball radius r_F (absolute; requires --r-v).
    #[arg(long)]
    r_f: Option<f64>,
    /// Outer ball radius R_V (absolute; requires --r-f).
    #[arg(long)]
    r_v: Option<f64>,
    /// Step measure as JSON lines {"word": .., "p": ..}; default uniform on generators.
    #[arg(long)]
    measure: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dump walk paths of the first runs (ls-run, needs --out).
    #[arg(long)]
    trace: bool,
    /// Execute sequentially.
    #[arg(long)]
    sequential: bool,
}

fn parse_field(s: &str) -> Result<Field, String> {
    s.parse().map_err(|_| format!("expected one of R, C, H, got `{s}`"))
}

impl Cli {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        set("field", self.field.map(|f| f.to_string()));
        set("dim", self.dim.map(|v| v.to_string()));
        set("group", self.group.clone());
        set("seed", self.seed.map(|v| v.to_string()));
        set("samples", self.samples.map(|v| v.to_string()));
        set("runs", self.runs.map(|v| v.to_string()));
        set("tol", self.tol.map(|v| v.to_string()));
        set("depth", self.depth.map(|v| v.to_string()));
        set("horizon", self.horizon.map(|v| v.to_string()));
        set("ball_radius", self.ball_radius.map(|v| v.to_string()));
        set("r_f", self.r_f.map(|v| v.to_string()));
        set("r_v", self.r_v.map(|v| v.to_string()));
        set("measure", self.measure.as_ref().map(|p| p.display().to_string()));
        set("trace", self.trace.then(|| "true".to_string()));
        m
    }
}

fn sidecar_path(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut settings = match &cli.config {
        Some(p) => match read_config(&p.display().to_string()) {
            Ok(m) => m,
            Err(e) => return usage(e),
        },
        None => BTreeMap::new(),
    };
    settings.extend(cli.overrides());
    let cfg = match RunConfig::from_map(&settings) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if cfg.trace && cli.out.is_none() {
        return usage("--trace needs --out");
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };

    let outcome = match commands::run(cli.command, &cfg, exec) {
        Ok(o) => o,
        Err(CommandError::Usage(m)) => return usage(m),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &outcome.primary).and_then(|_| {
            outcome.sidecars.iter().try_for_each(|(ext, bytes)| std::fs::write(sidecar_path(p, ext), bytes))
        }),
        None => std::io::stdout().write_all(&outcome.primary),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(3);
    }
    let failed: Vec<_> = outcome.checks.iter().filter(|c| !c.passed).collect();
    for c in &failed {
        eprintln!("{c}");
    }
    if outcome.strict && !failed.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
