//! `thermoform <config> [--seed N] [--out DIR] [--tol X]`
//!
//! Runs one command described by a structured config file and writes a
//! comma-separated result table plus a metadata sidecar next to it.
//! Exit status: 0 success, 2 invalid configuration, 3 numeric
//! non-convergence, 4 resource limit.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::Config;
use output::{write_outputs, Sidecar};

#[derive(Parser)]
#[command(name = "thermoform", version, about = "Pressure, Gibbs measures and large deviations for symbolic and interval dynamics")]
struct Cli {
    /// Path to the run configuration (structured text).
    config: PathBuf,
    /// Master RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the config's basename is resolved against it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spectral solver tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> thermoform::Result<()> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        thermoform::Error::invalid_parameter("config", format!("cannot read {:?}: {e}", cli.config))
    })?;
    let config = Config::parse(&text)?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let tol = cli.tol.unwrap_or(config.tolerances.spectral);
    if !(tol > 0.0) {
        return Err(thermoform::Error::invalid_parameter(
            "tol",
            "tolerance must be positive",
        ));
    }
    let output = run::run(&config, seed, tol)?;
    let basename = config
        .out
        .clone()
        .unwrap_or_else(|| format!("results/{}", config.command.name()));
    let base = match &cli.out {
        Some(dir) => dir.join(&basename),
        None => PathBuf::from(&basename),
    };
    let sidecar = Sidecar {
        command: config.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_text: &text,
        seed,
        spectral_tol: tol,
        cylinder_depth: config.tolerances.cylinder_depth,
        truncation: config.tolerances.truncation,
    };
    let (csv, meta) = write_outputs(&base, &output, &sidecar)?;
    println!("wrote {} and {}", csv.display(), meta.display());
    Ok(())
}
