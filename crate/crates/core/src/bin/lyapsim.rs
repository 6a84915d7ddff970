//! Config-driven experiment runner.
//!
//! ```text
//! lyapsim <subcommand> --config <path> [--seed S] [--workers W] [--out PATH]
//! ```
//!
//! The subcommand picks the experiment; the config file describes it (see
//! the config module for the schema). Results go to stdout as JSON, or to
//! `--out`/`output_path` as CSV with a `.run.json` sidecar.
//!
//! Exit codes: 0 success, 1 failed validation checks, 2 invalid config or
//! arguments, 3 chain death in a single-run estimate, 4 I/O failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use lyapsim::config::{Command, ExperimentConfig};
use lyapsim::error::Error;
use lyapsim::runner::{run, RunOutcome};

#[derive(Parser)]
#[command(name = "lyapsim", version, about = "Lyapunov exponents of random matrix products")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the experiment's primary seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trial-parallel experiments (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Top Lyapunov exponent by normalized vector iteration.
    Estimate(CommonArgs),
    /// Leading k exponents by orthonormal-frame iteration.
    Spectrum(CommonArgs),
    /// Sum of the two leading exponents by parallelogram-area growth.
    Pair(CommonArgs),
    /// Least exponent by the hyperplane-distance recursion.
    Least(CommonArgs),
    /// Empirical tail curve of a deviation statistic over many chains.
    Tail(CommonArgs),
    /// Least common denominator of a direction (optionally joint).
    Lcd(CommonArgs),
    /// Small-ball probability of a weighted atom sum.
    Smallball(CommonArgs),
    /// Built-in oracle suite: exact identities and reference values.
    Validate(CommonArgs),
}

impl CliCommand {
    fn split(self) -> (Command, CommonArgs) {
        match self {
            CliCommand::Estimate(a) => (Command::Estimate, a),
            CliCommand::Spectrum(a) => (Command::Spectrum, a),
            CliCommand::Pair(a) => (Command::Pair, a),
            CliCommand::Least(a) => (Command::Least, a),
            CliCommand::Tail(a) => (Command::Tail, a),
            CliCommand::Lcd(a) => (Command::Lcd, a),
            CliCommand::Smallball(a) => (Command::Smallball, a),
            CliCommand::Validate(a) => (Command::Validate, a),
        }
    }
}

fn main() -> ExitCode {
    let (command, args) = Cli::parse().command.split();
    match execute(command, args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn execute(command: Command, args: CommonArgs) -> Result<ExitCode, Error> {
    let config = ExperimentConfig::from_path(&args.config)?
        .with_overrides(args.seed, args.workers, args.out);
    let emit_to_stdout = config.output_path.is_none();
    let outcome = run(config, command)?;
    report(&outcome, command, emit_to_stdout)?;
    if outcome.failed_checks() > 0 {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn report(outcome: &RunOutcome, command: Command, emit_record: bool) -> Result<(), Error> {
    if command == Command::Validate {
        for check in &outcome.checks {
            let verdict = if check.passed { "pass" } else { "FAIL" };
            println!("{verdict}  {:<32} {}", check.name, check.detail);
        }
        let failed = outcome.failed_checks();
        println!(
            "{} checks, {} failed",
            outcome.checks.len(),
            failed
        );
        return Ok(());
    }
    if emit_record {
        let text = serde_json::to_string_pretty(&outcome.record)
            .map_err(|e| Error::Internal(format!("run record: {e}")))?;
        println!("{text}");
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ChainDied { .. } | Error::AllChainsDied => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}
