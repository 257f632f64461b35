use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xailab::data::{
    generate_synthetic, SyntheticConfig, DEFAULT_NOISE_CORRELATION, DEFAULT_NOISE_RESOLUTION,
    DEFAULT_QUANTIZED_NOISE,
};
use xailab::experiments::{run_config, ExperimentConfig, ARTIFACT_VERSION};
use xailab::Error;

#[derive(Debug, Parser)]
#[command(name = "xailab", version, about = "Scaffolding attacks on LIME, SHAP and SHLIME")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as `data.csv` plus `schema.toml`.
    GenData(GenData),
    /// Run the experiment described by a TOML config (or an emitted manifest).
    Run(Run),
    /// Print the artifact version.
    Version,
}

#[derive(Debug, clap::Args)]
struct GenData {
    #[arg(long)]
    rows: usize,
    /// Probability that the label equals the sensitive attribute.
    #[arg(long, default_value_t = 0.9)]
    bias: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of continuous noise features.
    #[arg(long, default_value_t = 12)]
    noise: usize,
    /// Number of fair-coin features unrelated to the label.
    #[arg(long, default_value_t = 1)]
    uncorrelated: usize,
    #[arg(long, default_value_t = DEFAULT_NOISE_CORRELATION)]
    noise_correlation: f64,
    #[arg(long, default_value_t = DEFAULT_NOISE_RESOLUTION)]
    noise_resolution: f64,
    #[arg(long, default_value_t = DEFAULT_QUANTIZED_NOISE)]
    quantized_noise: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct Run {
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of sweep cells evaluated at once.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    parallel: u16,
    /// Overrides the master seed of the config.
    #[arg(long, env = "XAILAB_SEED", hide_env_values = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
}

fn gen_data(args: &GenData) -> Result<(), Error> {
    let data = generate_synthetic(&SyntheticConfig {
        n_rows: args.rows,
        n_noise_features: args.noise,
        bias_strength: args.bias,
        n_uncorrelated: args.uncorrelated,
        seed: args.seed,
        noise_correlation: args.noise_correlation,
        noise_resolution: args.noise_resolution,
        quantized_noise: args.quantized_noise,
    })?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    data.write_csv(args.out.join("data.csv"))?;
    data.schema().save(args.out.join("schema.toml"))?;
    println!(
        "wrote {} rows to {}",
        data.n_rows(),
        args.out.join("data.csv").display()
    );
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run(args: &Run) -> Result<(), Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("xailab-out"));
    let outcome = run_config(&config, &out, args.parallel as usize)?;
    for e in &outcome.manifest.cell_errors {
        eprintln!("warning: {e}");
    }
    println!(
        "{} experiment complete; outputs in {}",
        outcome.manifest.experiment,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Run(args) => run(args),
        Command::Version => {
            println!("xailab {ARTIFACT_VERSION}");
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
