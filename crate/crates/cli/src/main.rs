use std::process::ExitCode;

use clap::Parser;

use qsphere_cli::acceptance::SuiteConfig;
use qsphere_cli::args::{Cli, Command};
use qsphere_cli::commands;
use qsphere_cli::config::Format;
use qsphere_cli::{CliError, ExitStatus, Report, THREADS_ENV};

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn execute(cli: Cli) -> Result<(Report, Format, Option<std::path::PathBuf>), CliError> {
    configure_threads()?;
    Ok(match cli.command {
        Command::Spectra { pair, imax, out } => (commands::spectra(pair.m, pair.n, imax)?, out.format, out.output),
        Command::Expand { pair, run, h, out } => {
            let cfg = pair.config(&run, &out)?;
            (commands::expand(&cfg, h)?, out.format, out.output)
        }
        Command::Kw { pair, run, amplitude, seeds, out } => {
            let cfg = pair.config(&run, &out)?;
            (commands::kw(&cfg, amplitude, seeds)?, out.format, out.output)
        }
        Command::Defect { pair, run, data, out } => {
            let cfg = pair.config(&run, &out)?;
            (commands::defect_cmd(&cfg, &data)?, out.format, out.output)
        }
        Command::Pullback { pair, run, t, out } => {
            let cfg = pair.config(&run, &out)?;
            (commands::pullback(&cfg, t)?, out.format, out.output)
        }
        Command::Report { all: _, seed, tol, out } => {
            if !(tol > 0.0) {
                return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
            }
            (commands::report(&SuiteConfig { seed, tol })?, out.format, out.output)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = execute(cli).and_then(|(report, format, output)| {
        report.emit(format, output.as_deref())?;
        Ok(report.pass)
    });
    let status = match outcome {
        Ok(true) => ExitStatus::Pass,
        Ok(false) => ExitStatus::Fail,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_status()
        }
    };
    ExitCode::from(status as u8)
}
