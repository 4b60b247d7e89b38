use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use minkmembrane::experiment::{
    cmd_compactified_compare, cmd_decay_fit, cmd_simulate, cmd_sweep_epsilon, cmd_verify, cmd_verify_conformal,
    load_config, Status,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Simulate,
    Verify,
    VerifyConformal,
    DecayFit,
    SweepEpsilon,
    CompactifiedCompare,
}

/// Numerical experiments for the minimal-surface equation in Minkowski space.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output artifact (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Writes the final `φ` slice of `simulate` as a field snapshot.
    #[arg(long)]
    dump_field: Option<PathBuf>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MINKMEMBRANE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("MINKMEMBRANE_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("MINKMEMBRANE_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> minkmembrane::Result<Status> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg, out, cli.dump_field.as_deref()),
        Command::Verify => cmd_verify(&cfg, out),
        Command::VerifyConformal => cmd_verify_conformal(&cfg, out),
        Command::DecayFit => cmd_decay_fit(&cfg, out),
        Command::SweepEpsilon => cmd_sweep_epsilon(&cfg, out),
        Command::CompactifiedCompare => cmd_compactified_compare(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
