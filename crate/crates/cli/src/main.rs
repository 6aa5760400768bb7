use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use tcvdp::io::write_json;
use tcvdp::Result;
use tcvdp_cli::manifest::{Manifest, RunStatus};
use tcvdp_cli::output::StagedDir;
use tcvdp_cli::run::{self, Kind, RunOptions};
use tcvdp_cli::{exit, exit_code, load_config};

#[derive(Parser)]
#[command(name = "tcvdp", version, about = "Coupled quantum van der Pol oscillator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decay rate of the order parameter against N.
    LangevinDecay(Args),
    /// Power spectrum of the order parameter.
    Spectrum(Args),
    /// Synchronization measure against N.
    SyncSweep(Args),
    /// Phase-space histograms of oscillator 1 and the error mode.
    Histograms(Args),
    /// Slowest Liouvillian eigenvalues and the steady state.
    LiouvilleSpectrum(Args),
    /// Checks against independent reference calculations.
    OracleSuite(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML configuration, or a `manifest.json` from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `ensemble.n_traj=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "TCVDP_WORKERS")]
    workers: Option<usize>,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
    /// Print the planned work and exit without writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Comma-separated times at which all trajectories are dumped.
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Vec<f64>,
}

impl Command {
    fn split(self) -> (Kind, Args) {
        match self {
            Command::LangevinDecay(a) => (Kind::LangevinDecay, a),
            Command::Spectrum(a) => (Kind::Spectrum, a),
            Command::SyncSweep(a) => (Kind::SyncSweep, a),
            Command::Histograms(a) => (Kind::Histograms, a),
            Command::LiouvilleSpectrum(a) => (Kind::LiouvilleSpectrum, a),
            Command::OracleSuite(a) => (Kind::OracleSuite, a),
        }
    }
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    let code = match execute(kind, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(kind: Kind, args: Args) -> Result<i32> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    if args.dry_run {
        println!("{}", pretty(&run::plan(kind, &cfg)?));
        return Ok(exit::SUCCESS);
    }
    if args.workers == Some(0) {
        return Err(tcvdp::Error::Config("--workers must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| tcvdp::Error::Config(format!("cannot start worker pool: {e}")))?;

    let out = args.out.unwrap_or_else(|| PathBuf::from(format!("out/{}", kind.name())));
    let staged = StagedDir::create(&out, args.force)?;
    let opts = RunOptions {
        snapshot_times: args.snapshot_times,
    };
    let mut manifest = Manifest::new(kind.name(), &cfg, &args.overrides, args.workers);
    let start = Instant::now();
    let outcome = pool.install(|| run::run(kind, &cfg, staged.path(), &opts))?;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.status = outcome.status.clone();
    manifest.warnings = outcome.warnings.clone();
    write_json(&staged.path().join("manifest.json"), &manifest)?;
    let dir = staged.commit()?;
    eprintln!("[tcvdp] wrote {}", dir.display());
    println!("{}", pretty(&outcome.summary));
    Ok(match outcome.status {
        RunStatus::Complete => exit::SUCCESS,
        RunStatus::Partial => exit::PARTIAL,
        RunStatus::Failed => exit::NUMERICAL,
    })
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("summaries are plain JSON")
}
