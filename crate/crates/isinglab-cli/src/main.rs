use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isinglab_cli::config::ExperimentConfig;
use isinglab_cli::experiment::{run_experiment, CliError, RunOutcome};
use isinglab_cli::report::merged_report;
use isinglab_cli::verify::{self, VerifyReport};

/// Percolation laboratory: run experiments, verify the build, merge reports.
#[derive(Parser)]
#[command(name = "isinglab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to a flat `key = value` config with `[section]` headers.
        config: PathBuf,
    },
    /// Run the verification suite (exact identities; `--full` adds the
    /// statistical acceptance battery).
    Verify {
        #[arg(long)]
        full: bool,
    },
    /// Merge experiment summaries into one scaling table.
    Report {
        /// Paths to `summary.json` files from previous runs.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

fn finish_verification(report: &VerifyReport) -> ExitCode {
    print!("{}", report.render());
    if let Some(failure) = report.first_failure() {
        eprintln!("first failure: {}", failure.name);
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run { config } => {
            let text = fs::read_to_string(&config)?;
            let parsed = ExperimentConfig::parse(&text)?;
            match run_experiment(&parsed, &text, None)? {
                RunOutcome::Files(files) => {
                    println!("wrote {}", files.results_csv.display());
                    println!("wrote {}", files.summary_json.display());
                    Ok(ExitCode::SUCCESS)
                }
                RunOutcome::Verified(report) => Ok(finish_verification(&report)),
            }
        }
        Command::Verify { full } => {
            let report = if full { verify::verify_full() } else { verify::verify_quick() };
            Ok(finish_verification(&report))
        }
        Command::Report { summaries } => {
            let merged = merged_report(&summaries)?;
            print!("{}", merged.text);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code().clamp(0, 255) as u8)
        }
    }
}
