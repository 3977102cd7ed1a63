//! `jcr`: runs the seeded JCR experiments from flat key=value configs.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical degeneracy, 1 I/O.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jcr_core::experiment::{self, ExperimentConfig, ExperimentError, ExperimentKind};

/// Worker-count variable; unset means all cores.
const WORKERS_ENV: &str = "JCR_WORKERS";

#[derive(Parser)]
#[command(
    name = "jcr",
    version,
    about = "Joint communication-radar waveform/beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment; `--key value` pairs override the config file.
    Run {
        config: PathBuf,
        #[arg(
            trailing_var_arg = true,
            allow_hyphen_values = true,
            value_name = "--KEY VALUE"
        )]
        overrides: Vec<String>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(
            trailing_var_arg = true,
            allow_hyphen_values = true,
            value_name = "--KEY VALUE"
        )]
        overrides: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    let overrides = experiment::parse_overrides(overrides)?;
    ExperimentConfig::load(&text, &overrides)
}

fn workers() -> Result<Option<usize>, ExperimentError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ExperimentError::Config(vec![format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            )])),
        },
    }
}

fn report(e: &ExperimentError) -> ExitCode {
    match e {
        ExperimentError::Config(lines) => {
            for l in lines {
                eprintln!("config error: {l}");
            }
            ExitCode::from(2)
        }
        ExperimentError::Numerical(_) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        ExperimentError::Io { .. } => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<22}{}", k.name(), k.summary());
            }
            Ok(())
        }
        Command::Validate { config, overrides } => load(&config, &overrides).map(|c| {
            println!("{}: ok ({})", config.display(), c.experiment.name());
        }),
        Command::Run { config, overrides } => load(&config, &overrides)
            .and_then(|c| Ok((workers()?, c)))
            .and_then(|(w, c)| {
                let files = experiment::run(&c, w)?;
                for f in files {
                    println!("{}", f.display());
                }
                Ok(())
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
