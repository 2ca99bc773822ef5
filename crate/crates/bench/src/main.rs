use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entropic_bench::experiments::{summarize_file, RunOptions};
use entropic_bench::summary::write_summary;
use entropic_bench::{output_dir, run_experiment, BenchError, Experiment, ExperimentConfig};

/// Risk-averse value learning experiments.
#[derive(Parser)]
#[command(name = "entropic-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Abort with status 3 at the first non-finite loss.
        #[arg(long)]
        fail_fast: bool,
        /// Cells run concurrently (0 = one per core).
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Print the summary table of a records CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the oracle suite with default settings.
    Oracle,
    /// Run the gradient checks with default settings.
    Gradcheck,
}

fn execute(mut cfg: ExperimentConfig, opts: RunOptions) -> Result<bool, BenchError> {
    cfg.output = output_dir(&cfg.output);
    let report = run_experiment(&cfg, opts)?;
    write_summary(std::io::stdout().lock(), &report.summary)?;
    eprintln!("records: {}", report.records_path.display());
    eprintln!("summary: {}", report.summary_path.display());
    if report.failed_checks > 0 {
        eprintln!("{} check(s) failed", report.failed_checks);
    }
    Ok(report.failed_checks == 0)
}

fn main_inner(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Run { config, fail_fast, parallel } => {
            let text = std::fs::read_to_string(&config).map_err(|e| BenchError::io(&config, e))?;
            let cfg = ExperimentConfig::parse(&text)?;
            execute(cfg, RunOptions { fail_fast, parallel })
        }
        Command::Summarize { input } => {
            write_summary(std::io::stdout().lock(), &summarize_file(&input)?)?;
            Ok(true)
        }
        Command::Oracle => execute(ExperimentConfig::defaults(Experiment::OracleSuite), RunOptions::default()),
        Command::Gradcheck => execute(ExperimentConfig::defaults(Experiment::GradCheck), RunOptions::default()),
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
