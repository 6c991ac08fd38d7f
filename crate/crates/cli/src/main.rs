use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "gmrf-telescope", version, about = "Shell-chain tools for lattice Gauss-Markov random fields")]
struct Cli {
    /// Directory for every output file (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SampleFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SurfaceKind {
    Radial,
    Shifted,
    Ellipse,
    Affine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the shells of an N×M lattice in traversal order.
    Shells {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
    },
    /// Assemble A, A_b and the boundary covariance from a model config.
    Build {
        #[arg(long)]
        model: PathBuf,
    },
    /// Compute the chain transition and noise matrices stage by stage.
    Factorize {
        #[arg(long)]
        model: PathBuf,
        /// Also compare against the dense covariance oracle.
        #[arg(long)]
        check_oracle: bool,
    },
    /// Draw fields from the model, one file per sample; sample i uses seed + i.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value_t = SampleFormat::Csv)]
        format: SampleFormat,
    },
    /// Posterior mean and variance from pointwise observations.
    Estimate {
        #[arg(long)]
        model: PathBuf,
        /// CSV rows `row,col,gain,variance,value`; frame coordinates observe the boundary.
        #[arg(long)]
        obs: PathBuf,
        /// Output file stem.
        #[arg(long, default_value = "estimate")]
        prefix: String,
    },
    /// Smooth a noisy N×M grayscale image.
    Denoise {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        noise_var: f64,
        /// Clean image for MSE reporting.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// Output image file name inside the output directory.
        #[arg(long, default_value = "denoised.pgm")]
        output: String,
    },
    /// Run the continuous-index numerical checks.
    Verify {
        #[arg(long, default_value_t = 100_000)]
        bridge_paths: usize,
    },
    /// Sample telescoping surfaces of a homotopy and check them.
    Surfaces {
        #[arg(long, value_enum, default_value_t = SurfaceKind::Radial)]
        kind: SurfaceKind,
        /// Contraction point `x,y` for the shifted and affine kinds.
        #[arg(long, value_parser = commands::parse_point, allow_hyphen_values = true)]
        center: Option<[f64; 2]>,
        /// Polygon for the affine kind: square, l-shape, u-shape or a CSV of `x,y` vertices.
        #[arg(long, default_value = "square")]
        domain: String,
        /// Exponents `p,q` of the ellipse semi-axes `(1-λ)^p`, `(1-λ)^q`.
        #[arg(long, value_parser = commands::parse_point, default_value = "1,2")]
        exponents: [f64; 2],
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        levels: usize,
        #[arg(long, default_value_t = 10_000)]
        coverage_points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
