mod args;
mod bench;
mod check;
mod config;
mod error;
mod generate;
mod models;
mod solve;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::CliConfig;
use crate::error::CliError;

/// Writes `text` to `out`, or to standard output when no path is given.
pub(crate) fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to standard output")?;
            stdout.flush().context("writing to standard output")?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = CliConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => generate::run(&a, &cfg),
        Command::Solve(a) => solve::run(&a, &cfg),
        Command::Check(a) => check::run(&a, &cfg),
        Command::Bench(a) => bench::run(&a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
