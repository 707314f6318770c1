//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use maxsplit::config::{parse_config_file, resolve_config, CliOverrides, ExperimentKind};
use maxsplit::experiment::run_experiment;

/// Runs the stochastic-Maxwell splitting experiments and writes CSV
/// outputs plus a resolved-config sidecar into the output directory.
#[derive(Parser, Debug)]
#[command(name = "maxsplit", version, about)]
struct Cli {
    /// Config file (flat key = value with one [section] per experiment).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Experiment to run: energy, energy-error, paths, order, oracle-check.
    #[arg(long)]
    experiment: Option<String>,

    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (0 or omitted: default pool).
    #[arg(long)]
    threads: Option<usize>,

    /// Base seed for all noise paths.
    #[arg(long)]
    seed: Option<u64>,

    /// Run the order experiment at the full reference scale
    /// (25^3 grid, taus 2^-4..2^-8; about 12 s per core in release).
    #[arg(long)]
    full_scale: bool,
}

fn run(cli: Cli) -> maxsplit::Result<()> {
    let raw = match &cli.config {
        Some(path) => Some(parse_config_file(path)?),
        None => None,
    };
    let experiment: Option<ExperimentKind> = match &cli.experiment {
        Some(name) => Some(name.parse()?),
        None => None,
    };
    let overrides = CliOverrides {
        experiment,
        seed: cli.seed,
        threads: cli.threads,
        out_dir: cli.out.clone(),
        full_scale: cli.full_scale,
    };
    let config = resolve_config(raw.as_ref(), &overrides)?;
    let summary = run_experiment(&config)?;
    for line in &summary.lines {
        println!("{line}");
    }
    println!(
        "wrote {} files to {}",
        summary.files.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
