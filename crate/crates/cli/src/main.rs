//! `adsb-latency`: ingest, latency, anomaly, simulate and validate
//! subcommands over the JSONL report and track formats.
//!
//! Exit codes: 0 success, 1 input error, 2 internal failure, 3 validation
//! failure.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "adsb-latency", version, about = "ADS-B uncompensated latency estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, segment and filter report and track files.
    Ingest(Overrides),
    /// Estimate per-report and per-track latency.
    Latency(Overrides),
    /// Check UTC-coupled aircraft for timing anomalies.
    Anomaly(Overrides),
    /// Generate synthetic reports, tracks and ground truth from a scenario.
    Simulate(Overrides),
    /// Run the synthetic acceptance suite.
    Validate(Overrides),
}

/// Marks an error as caused by user input (exit code 1).
#[derive(Debug)]
pub struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

impl InputError {
    pub fn msg(m: &str) -> anyhow::Error {
        InputError(m.to_string()).into()
    }

    pub fn wrap(e: anyhow::Error) -> anyhow::Error {
        InputError(format!("{e:#}")).into()
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<InputError>() || cause.is::<std::io::Error>() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<adsb_latency::Error>() {
            return if err.is_input_error() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, overrides): (fn(&RunConfig) -> anyhow::Result<Outcome>, &Overrides) = match &cli.command {
        Command::Ingest(o) => (commands::ingest, o),
        Command::Latency(o) => (commands::latency, o),
        Command::Anomaly(o) => (commands::anomaly, o),
        Command::Simulate(o) => (commands::simulate, o),
        Command::Validate(o) => (commands::validate, o),
    };
    let result = RunConfig::load(overrides).and_then(|cfg| run(&cfg));
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailed) => ExitCode::from(3),
        Err(e) => {
            let code = exit_code(&e);
            let tag = e.chain().find_map(|c| c.downcast_ref::<adsb_latency::Error>()).map(|x| x.code());
            match tag {
                Some(tag) => eprintln!("error [{tag}]: {e:#}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(code)
        }
    }
}
