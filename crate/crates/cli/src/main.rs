use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmlab::{parse_config, run, CliError, Mode};

#[derive(Parser)]
#[command(name = "swarmlab", version, about = "Run kinetic-swarm experiments from a TOML configuration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Particle run of the eps-scaled system.
    SimulateEps(RunArgs),
    /// Particle run of the limit dynamics on the velocity sphere.
    SimulateLimit(RunArgs),
    /// W1 distance between two snapshot files.
    Compare(RunArgs),
    /// W1 between eps-runs and the limit run over an eps list and time grid.
    Sweep(RunArgs),
    /// Relaxation roots over forcing and eps grids.
    Roots(RunArgs),
    /// Closed-form relaxation flow of one velocity.
    Flow(RunArgs),
    /// Projection of a snapshot onto the velocity sphere.
    Project(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Mode, RunArgs) {
        match self {
            Command::SimulateEps(a) => (Mode::SimulateEps, a),
            Command::SimulateLimit(a) => (Mode::SimulateLimit, a),
            Command::Compare(a) => (Mode::Compare, a),
            Command::Sweep(a) => (Mode::Sweep, a),
            Command::Roots(a) => (Mode::Roots, a),
            Command::Flow(a) => (Mode::Flow, a),
            Command::Project(a) => (Mode::Project, a),
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swarmlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    let (mode, args) = command.split();
    if let Some(n) = std::env::var("SWARM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Validation(format!("SWARM_THREADS: {e}")))?;
    }
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if cfg.mode != mode {
        return Err(CliError::Validation(format!("config declares mode {:?}, subcommand is {mode:?}", cfg.mode)));
    }
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
    if let Some(out) = args.output {
        // Absolute paths survive the join in `run`; relative ones are taken from the working directory.
        let out = if out.is_absolute() { out } else { std::env::current_dir()?.join(out) };
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    let manifest = run(&cfg, base)?;
    println!("{} files written, config hash {}", manifest.files.len(), manifest.config_hash);
    Ok(())
}
