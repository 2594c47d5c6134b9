//! `batched-bandit` subcommands.
//!
//! Exit status is 0 on success, 1 when input fails to parse or validate
//! (including bad command lines), and 2 when a file cannot be read or
//! written.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{parse_config, render_config};
use super::log::read_log;
use super::report::{
    analyze_summaries, read_summary, render_summary_table, render_wald_table, write_replications,
    write_trace, SummaryRow,
};
use super::{IoError, LocatedIssue};
use crate::analysis::{WaldResult, DEFAULT_ALPHA};
use crate::engine::{replay, run_experiment, EngineError};
use crate::replicate::{aggregate, run_replications};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "batched-bandit", version, about = "Batched Beta-Bernoulli bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a config and write its trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also run this many seeded replications and write aggregates.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        replications: u64,
        /// Worker threads for replications; defaults to one per core.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        workers: Option<u64>,
    },
    /// Rebuild a trace from an observation log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise Wald tests with Bonferroni correction on a summary table.
    Analyze {
        #[arg(long)]
        summary: PathBuf,
        /// Family-wise significance level.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Check a config file and report every violated constraint.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Io(IoError),
    Invalid(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        if e.is_io() {
            Failure::Io(e)
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let rendered = e.render().to_string();
            if help {
                let _ = write!(stdout, "{rendered}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{rendered}");
            return EXIT_INVALID;
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            replications,
            workers,
        } => simulate(&config, &out, replications, workers.map(|w| w as usize), stdout),
        Command::Replay { log, out } => replay_log(&log, &out, stdout),
        Command::Analyze { summary, alpha } => analyze(&summary, alpha, stdout),
        Command::Validate { config } => validate(&config, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Io(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_IO
        }
        Err(Failure::Invalid(message)) => {
            let _ = writeln!(stderr, "error: {message}");
            EXIT_INVALID
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Io(IoError::io(path, e)))
}

fn simulate(
    config: &Path,
    out: &Path,
    replications: u64,
    workers: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let (cfg, env) = parse_config(config)?;
    let trace = run_experiment(&cfg, &env)?;
    write_trace(&trace, out)?;
    write_file(&out.join("config_used.cfg"), &render_config(&cfg, &env))?;
    if replications > 1 {
        let outcomes = run_replications(&cfg, &env, replications, workers)?;
        write_replications(&outcomes, &aggregate(&outcomes, cfg.arms()), out)?;
    }
    let _ = writeln!(
        stdout,
        "simulated {} weeks, {} replication(s) -> {}",
        cfg.horizon(),
        replications,
        out.display()
    );
    Ok(())
}

fn replay_log(log: &Path, out: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let observations = read_log(log)?;
    let trace = replay(&observations)?;
    write_trace(&trace, out)?;
    let _ = writeln!(
        stdout,
        "replayed {} rows over {} weeks -> {}",
        observations.len(),
        trace.weeks().len(),
        out.display()
    );
    Ok(())
}

/// Reads a summary table and runs the pairwise tests, as `analyze` does.
pub fn analyze_summary_file(
    path: &Path,
    family_alpha: f64,
) -> Result<(Vec<SummaryRow>, Vec<WaldResult>), IoError> {
    if !(family_alpha > 0.0 && family_alpha < 1.0) {
        return Err(IoError::Validation(vec![LocatedIssue {
            line: None,
            message: format!("alpha must lie in (0, 1), got {family_alpha}"),
        }]));
    }
    let rows = read_summary(path)?;
    let results = analyze_summaries(&rows, family_alpha)?;
    Ok((rows, results))
}

fn analyze(summary: &Path, alpha: f64, stdout: &mut dyn Write) -> Result<(), Failure> {
    let (rows, results) = analyze_summary_file(summary, alpha)?;
    let _ = write!(stdout, "{}\n{}", render_summary_table(&rows), render_wald_table(&results));
    let rejected = results.iter().filter(|r| r.significant).count();
    let _ = writeln!(
        stdout,
        "\n{rejected} of {} comparisons significant at family alpha {alpha}",
        results.len()
    );
    Ok(())
}

fn validate(config: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let (cfg, _) = parse_config(config)?;
    let _ = writeln!(
        stdout,
        "ok: {} arms, {} weeks, seed {}",
        cfg.arms(),
        cfg.horizon(),
        cfg.seed()
    );
    Ok(())
}
