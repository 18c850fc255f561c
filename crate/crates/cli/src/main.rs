//! `entrate`: entropy-rate estimation for text corpora and LLM output.

mod analyze;
mod compare;
mod config;
mod corpus;
mod failure;
mod generate;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Settings;
use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "entrate", version, about = "Estimate entropy rates of text sources")]
struct Cli {
    /// key = value file with defaults for the subcommand's flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Query a chat-completions endpoint over items and temperatures
    Generate(generate::GenerateArgs),
    /// Entropy curve, coverage diagnostics and rate fit for a corpus
    Analyze(analyze::AnalyzeArgs),
    /// Merge fit reports into a table and plot data
    Compare(compare::CompareArgs),
    /// Count n-grams of a corpus into a reusable table file
    Count(analyze::CountArgs),
    /// Write a synthetic text from a source with known entropy rate
    Simulate(simulate::SimulateArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => generate::run(a, &settings),
        Command::Analyze(a) => analyze::run(a, &settings),
        Command::Compare(a) => compare::run(a, &settings),
        Command::Count(a) => analyze::count(a, &settings),
        Command::Simulate(a) => simulate::run(a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
