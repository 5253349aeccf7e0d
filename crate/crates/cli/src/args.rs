use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Format, RunConfig};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "qsphere", version, about = "Conformal Q-curvature increment experiments on round spheres")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact spectral table and identity checks
    Spectra {
        #[command(flatten)]
        pair: Pair,
        /// Largest eigenvalue index
        #[arg(long, default_value_t = 10)]
        imax: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Second and third order coefficients of Q[tz] (Q~[tz] off the critical dimension)
    Expand {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        run: RunArgs,
        /// Finite-difference step, in [1e-3, 5e-2]
        #[arg(long, default_value_t = 0.002)]
        h: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Kazdan-Warner integrals over random fields
    Kw {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        run: RunArgs,
        /// Sup-norm of the random conformal factors
        #[arg(long, default_value_t = 0.2)]
        amplitude: f64,
        /// Number of random fields
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Defect map D(f) = P1 S(f)
    Defect {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DefectData,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Flatness, derivative and group law of the conformal pullback family
    Pullback {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        run: RunArgs,
        /// Flow parameter, |t| <= 1
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Full acceptance suite
    Report {
        /// Run every criterion
        #[arg(long, required = true)]
        all: bool,
        /// Seed offset of every random input
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Newton tolerance
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct Pair {
    /// Half the operator order
    #[arg(long)]
    pub m: u32,
    /// Sphere dimension
    #[arg(long)]
    pub n: u32,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Band limit of the zonal basis
    #[arg(long, default_value_t = 64)]
    pub lmax: usize,
    /// Quadrature nodes per retained degree
    #[arg(long, default_value_t = 5.0)]
    pub oversample: f64,
    /// Newton tolerance
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Seed of the random inputs
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DefectData {
    /// Zonal field file in the JSON field schema
    #[arg(long = "f", value_name = "FILE")]
    pub file: Option<PathBuf>,
    /// f = Q[tz]; three or more comma-separated values fit a cubic in t
    #[arg(long, value_name = "T", value_delimiter = ',', allow_hyphen_values = true)]
    pub tz: Option<Vec<f64>>,
    /// Random antipodally even f with sup-norm 0.05
    #[arg(long)]
    pub moser: bool,
    /// f = EPS z, which lies outside the image
    #[arg(long, value_name = "EPS", allow_hyphen_values = true)]
    pub obstruction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Pair {
    pub fn config(&self, run: &RunArgs, out: &OutputArgs) -> Result<RunConfig> {
        RunConfig::new(
            self.m,
            self.n,
            run.lmax,
            run.oversample,
            run.tol,
            run.seed,
            out.output.clone(),
            out.format,
        )
    }
}
