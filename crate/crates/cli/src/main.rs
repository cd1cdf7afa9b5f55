use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deepfact_cli::{run_config_file, Kind};

#[derive(Parser)]
#[command(name = "deepfact", version, about = "Deep matrix factorization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent trials.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and record its trajectory.
    Simulate(Common),
    /// Tabulate predicted limit spectra over a grid.
    Theory(Common),
    /// Classify whether observed entries evolve independently.
    Coupling(Common),
    /// Compare warm-started and fresh training after new observations.
    Plasticity(Common),
    /// Simulate a grid and compare with the predicted limits.
    Sweep(Common),
    /// Spectral metrics of the ground truth and observation connectivity.
    Metrics(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Simulate(c) => (Kind::Simulate, c),
        Command::Theory(c) => (Kind::Theory, c),
        Command::Coupling(c) => (Kind::Coupling, c),
        Command::Plasticity(c) => (Kind::Plasticity, c),
        Command::Sweep(c) => (Kind::Sweep, c),
        Command::Metrics(c) => (Kind::Metrics, c),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run_config_file(kind, &common.config, common.out.as_deref(), common.seed) {
        Ok((dir, summary)) => {
            let flag = summary.get("all_converged").and_then(|v| v.as_bool());
            if flag == Some(false) {
                eprintln!("warning: some runs did not reach the loss threshold (see summary.json)");
            }
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
