//! `beamalign`: bound evaluation and Monte Carlo sweeps from the command line.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config_text, parse_override, Plan};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] beamalign_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "beamalign", version, about = "Beam-alignment training bounds and simulations")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` lines or a JSON run manifest).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Upper, lower and LDP bounds over a range of pilots per pair.
    Bounds,
    /// One sweep: first configured strategy at the first SNR.
    Simulate,
    /// Every configured strategy at every SNR.
    Sweep,
    /// Regenerate the data of one figure preset.
    Figure {
        /// fig2 ... fig7; may come from the config's `figure` key instead.
        id: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bounds => "bounds",
            Self::Simulate => "simulate",
            Self::Sweep => "sweep",
            Self::Figure { .. } => "figure",
        }
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("BEAMALIGN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "invalid value `{v}` for BEAMALIGN_THREADS: expected a positive integer"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut entries = Vec::new();
    if let Some(path) = &args.config {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: origin.clone(),
            source,
        })?;
        entries.extend(parse_config_text(&text, &origin)?);
    }
    for o in &args.overrides {
        entries.push(parse_override(o)?);
    }
    if let Some(s) = args.seed {
        entries.push(("seed".into(), s.to_string()));
    }
    if let Some(t) = args.trials {
        entries.push(("trials".into(), t.to_string()));
    }
    let figure = match &args.command {
        Command::Figure { id } => id.as_deref(),
        _ => None,
    };
    let plan = Plan::resolve(&entries, figure)?;
    if matches!(args.command, Command::Figure { .. }) && plan.figure.is_none() {
        return Err(CliError::Config(
            "`figure` needs an id such as fig3, given as an argument or a `figure` key".into(),
        ));
    }
    let threads = threads_from_env()?;
    run::run(&args.command, &plan, &args.out, threads)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
