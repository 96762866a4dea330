//! `lyaplab`: batch front end for Lyapunov spectra of surface and triangle
//! group representations.

mod commands;
mod config;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    SelftestFailed = 1,
    Refused = 2,
    Io = 3,
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn refuse(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Refused,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Io,
            message: message.into(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lyaplab",
    version,
    about = "Lyapunov exponents of flat bundles over hyperbolic surfaces and orbifolds",
    args_override_self = true,
    after_help = "Exponents are reported in the minus4 normalization by default, which is the \
curvature −4 convention: a Fuchsian representation has λ₁ = 1. The minus1 values are half of \
these.\n\nA --config file holds key=value lines with the long flag names as keys. \
Flags on the command line override it."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the Lyapunov spectrum of a representation.
    Spectrum(Common),
    /// Top exponent along a bending sweep.
    Sweep(SweepArgs),
    /// Error term of a developing map and covector.
    Err(ErrArgs),
    /// Error term of the orbit counting function, which converges to π/covol.
    OrbitCount(OrbitArgs),
    /// Build and transform a representation and write it in the rep file format.
    Rep(Common),
    /// Run the invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// key=value file with defaults for any long flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// triangle:p,q,r or surface:g.
    #[arg(long, default_value = "triangle:3,3,4")]
    pub group: String,
    /// builtin:fuchsian, builtin:trivial[:n], builtin:unitary-cube or a rep file path.
    #[arg(long, default_value = "builtin:fuchsian")]
    pub rep: String,
    /// sym:k, ext:k or bend:re,im; repeat to chain, applied left to right.
    #[arg(long = "transform", action = clap::ArgAction::Append)]
    pub transforms: Vec<String>,
    /// Flow time per sample.
    #[arg(long, default_value_t = 500.0)]
    pub time: f64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Steps between QR re-orthonormalizations.
    #[arg(long = "qr-interval", default_value_t = 8)]
    pub qr_interval: usize,
    /// minus4 (curvature −4, default) or minus1.
    #[arg(long, default_value = "minus4")]
    pub normalization: String,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render the CSV as an SVG line plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// bend-re or bend-im.
    #[arg(long, default_value = "bend-im")]
    pub param: String,
    /// start:end:count or a comma-separated list.
    #[arg(long, default_value = "0:2:11")]
    pub grid: String,
}

#[derive(Args, Debug, Clone)]
pub struct ErrArgs {
    #[command(flatten)]
    pub common: Common,
    /// identity, veronese:n, or ode:c0,c1,… for φ(z) = Σ c_k z^k.
    #[arg(long, default_value = "identity")]
    pub dev: String,
    /// Comma-separated coordinates, or poly:c0,c1,… for a Veronese map.
    #[arg(long)]
    pub covector: String,
    /// Ball center x,y.
    #[arg(long, default_value = "0,1")]
    pub center: String,
    #[arg(long = "t-max", default_value_t = 20.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 400)]
    pub nodes: usize,
}

#[derive(Args, Debug, Clone)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ball center x,y; the orbit is that of the polygon's interior point.
    #[arg(long, default_value = "0.13,1.21")]
    pub center: String,
    #[arg(long = "t-max", default_value_t = 12.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1200)]
    pub nodes: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SelftestArgs {
    /// Test hook: perturb generator entries by this amount.
    #[arg(long = "corrupt-generators", hide = true)]
    pub corrupt_generators: Option<f64>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::merge_config(argv) {
        Ok(a) => a,
        Err(f) => return report(f),
    };
    let cli = Cli::parse_from(argv);
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("lyaplab: {}", f.message);
    ExitCode::from(f.exit as u8)
}
