mod commands;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "gwsurr",
    version,
    about = "Reduced-order chirp surrogates with spiral regressors"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Global {
    /// Run configuration (JSON). Defaults to <out>/config.json, then the desk preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Greedy basis tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Regressor architecture such as S-32-64; repeat for several.
    #[arg(long, global = true)]
    pub spec: Vec<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Generate training (equispaced), validation and test (random) waveforms.
    GenData,
    /// Greedy reduced basis from the training waveforms.
    BuildBasis,
    /// Empirical interpolant and the coefficient datasets.
    BuildEim,
    /// Autoencoder on the training coefficients, with latent diagnostics.
    TrainAe,
    /// PCA baseline for the autoencoder.
    Pca,
    /// Train every configured regressor.
    TrainReg,
    /// Test-set mismatch for every regressor, the spline and the EIM floor.
    Eval,
    /// Natural cubic spline baseline.
    Spline,
    /// Inference throughput of every regressor.
    Bench,
    /// Write figure data as CSV.
    ExportFig {
        #[arg(value_enum)]
        kind: FigKind,
    },
    /// Write a configuration preset to a file.
    InitConfig {
        path: PathBuf,
        #[arg(long, default_value = "desk")]
        preset: String,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigKind {
    Coeffs,
    Latent,
    Loss,
    Mismatch,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.global, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
