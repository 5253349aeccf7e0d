use std::path::PathBuf;
use std::sync::Arc;

use clap::ValueEnum;
use qsphere::solver::NewtonOptions;
use qsphere::{SphereParams, ZonalBasis};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Smallest band limit accepted on the command line.
pub const MIN_LMAX: usize = 8;

/// Smallest oversampling factor the quadrature accepts.
pub const MIN_OVERSAMPLE: f64 = 1.5;

/// Validated settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SphereParams,
    pub lmax: usize,
    pub oversample: f64,
    pub tol: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(
        m: u32,
        n: u32,
        lmax: usize,
        oversample: f64,
        tol: f64,
        seed: u64,
        output: Option<PathBuf>,
        format: Format,
    ) -> Result<Self> {
        let params = SphereParams::new(m, n)?;
        if lmax < MIN_LMAX {
            return Err(CliError::Usage(format!("--lmax must be at least {MIN_LMAX}, got {lmax}")));
        }
        if !(oversample >= MIN_OVERSAMPLE) || !oversample.is_finite() {
            return Err(CliError::Usage(format!(
                "--oversample must be at least {MIN_OVERSAMPLE}, got {oversample}"
            )));
        }
        NewtonOptions::with_tol(tol)?;
        Ok(Self { params, lmax, oversample, tol, seed, output, format })
    }

    pub fn basis(&self) -> Result<Arc<ZonalBasis>> {
        Ok(ZonalBasis::new(self.params.clone(), self.lmax, self.oversample)?)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.tol, ..NewtonOptions::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(m: u32, n: u32, lmax: usize, os: f64, tol: f64) -> Result<RunConfig> {
        RunConfig::new(m, n, lmax, os, tol, 0, None, Format::Json)
    }

    #[test]
    fn validation() {
        assert!(config(1, 2, 64, 2.0, 1e-12).is_ok());
        assert!(matches!(config(2, 2, 64, 2.0, 1e-12), Err(CliError::Core(_))));
        assert!(matches!(config(1, 2, 7, 2.0, 1e-12), Err(CliError::Usage(_))));
        assert!(matches!(config(1, 2, 8, 1.0, 1e-12), Err(CliError::Usage(_))));
        assert!(config(1, 2, 8, 2.0, 0.0).is_err());
    }
}
