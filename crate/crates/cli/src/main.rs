//! `npspectra`: batch front end for spectra, inversion checks and
//! negative-eigenvalue certificates.
//!
//! Exit status: 0 success or identity passed, 1 usage or I/O error,
//! 2 certified negative, 3 not applicable, 4 inconclusive or identity failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "npspectra", version, about = "Neumann-Poincare spectra and inversion identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues of the NP operator, largest first.
    Spectrum(SpectrumArgs),
    /// Map a shape through an inversion and write the image boundary.
    Invert(InvertArgs),
    /// Certify a negative NP eigenvalue from a concavity witness.
    Certify(CertifyArgs),
    /// Check one identity numerically.
    Verify(VerifyArgs),
    /// Gaussian curvature extremes and the concavity scan.
    Curvature(CurvatureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Identity {
    Jump,
    Plemelj,
    SingleLayer,
    NpTransform,
    Energy,
    Conformal,
    Spectra2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DensityChoice {
    One,
    Random,
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Shape specification (JSON).
    #[arg(long)]
    shape: PathBuf,
    /// Override the refinement of the shape file.
    #[arg(long)]
    refinement: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Keep only the largest `count` eigenvalues.
    #[arg(long)]
    count: Option<usize>,
    /// Compute eigenvectors and report eigenpair residuals.
    #[arg(long)]
    vectors: bool,
    /// Two-column gnuplot data file `index eigenvalue`.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InvertArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Inversion center, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    center: String,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Inversion center, comma separated, or `auto`.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    center: String,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Largest accepted relative gap in the quadratic-form identity.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Skip the spectral cross-check.
    #[arg(long)]
    no_spectra: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    identity: Identity,
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Inversion center, comma separated; the origin when absent.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, value_enum, default_value = "one")]
    density: DensityChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subtract the weighted mean from the densities.
    #[arg(long)]
    mean_zero: bool,
    /// Pass threshold on the residual; 1e-6 for curves, 2e-2 for surfaces
    /// when absent.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Run at each listed refinement, comma separated.
    #[arg(long)]
    ladder: Option<String>,
    /// Two-column gnuplot data file `refinement residual` (with `--ladder`).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvatureArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Center for the concavity scan, comma separated, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(value) = std::env::var("NP_SPECTRA_THREADS") {
        match value.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = npspectra::configure_threads(n) {
                    eprintln!("warning: {e}");
                }
            }
            _ => {
                eprintln!("error: NP_SPECTRA_THREADS must be a positive integer, got {value:?}");
                return ExitCode::from(1);
            }
        }
    }
    match commands::run(cli.command) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
