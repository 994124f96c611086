//! `pulsegan`: train, translate, evaluate and synthesize from the command line.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime failures.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "pulsegan", version, about = "PPG to ABP waveform translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on every record of the configured dataset and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate the ABP waveform of one record from its PPG channel.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the configured evaluation protocol and write reports.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the configured synthetic subjects as record files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn usage_from(e: pulsegan::Error) -> Self {
        Self::usage(e.to_string())
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<pulsegan::Error> for CliError {
    fn from(e: pulsegan::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train { config } => commands::train(&config),
        Command::Translate {
            checkpoint,
            input,
            output,
        } => commands::translate(&checkpoint, &input, &output),
        Command::Evaluate { config } => commands::evaluate(&config),
        Command::Synth { config, out_dir } => commands::synth(&config, &out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind {
                ErrorKind::Usage => 1,
                ErrorKind::Runtime => 2,
            })
        }
    }
}
