//! `rank1sense` experiment runner.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure (reported as a JSON
//! object on stderr). `RANK1SENSE_THREADS` caps the worker pool.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use rank1sense::Error;
use serde_json::json;

use args::{Cli, Command, Format, Resolved, UsageError};

const THREADS_VAR: &str = "RANK1SENSE_THREADS";

/// Print `msg` with the usage line of `subcommand` (or the top level) and exit 2.
fn usage_exit(subcommand: Option<&str>, msg: &str) -> ! {
    let mut cmd = Cli::command();
    if let Some(sub) = subcommand.and_then(|name| cmd.find_subcommand(name).cloned()) {
        let name = format!("rank1sense {}", sub.get_name());
        sub.bin_name(name).error(ErrorKind::InvalidValue, msg).exit()
    }
    cmd.error(ErrorKind::InvalidValue, msg).exit()
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::NonFinite { .. } => "non_finite",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::NotOrthonormal { .. } => "not_orthonormal",
        Error::NotUnit { .. } => "not_unit",
        Error::NotOrthogonal { .. } => "not_orthogonal",
        Error::SingularB { .. } => "singular_b",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::SketchRankDeficient { .. } => "sketch_rank_deficient",
        Error::NoConvergence { .. } => "no_convergence",
        Error::InsufficientSamples { .. } => "insufficient_samples",
        Error::RankCollapse { .. } => "rank_collapse",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Format(_) => "format",
    }
}

fn runtime_failure(command: &str, e: &Error) -> ExitCode {
    let report = json!({ "error": { "command": command, "kind": error_kind(e), "message": e.to_string() } });
    let _ = writeln!(std::io::stderr(), "{report}");
    ExitCode::from(1)
}

fn init_threads() {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .expect("global pool is built once, before any parallel work");
        }
        _ => usage_exit(None, &format!("{THREADS_VAR}={raw:?} must be a positive integer")),
    }
}

fn execute(command: &Command, cfg: &Resolved) -> rank1sense::Result<()> {
    let out = output::open(cfg.out.as_deref())?;
    match command {
        Command::Run(_) => {
            let summary: Option<Box<dyn Write>> = match (cfg.format, commands::summary_path(cfg)) {
                (Format::Json, _) => None,
                (Format::Csv, Some(path)) => Some(output::open(Some(&path))?),
                (Format::Csv, None) => Some(Box::new(std::io::stderr())),
            };
            commands::run(cfg, out, summary)
        }
        Command::SweepM(_) => commands::sweep_m(cfg, out),
        Command::CheckOperators(_) => commands::check_operators(cfg, out),
        Command::ProofDiagnostics(_) => commands::proof_diagnostics(cfg, out),
        Command::BenchRegression(_) => commands::bench(cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let cfg = match args::resolve(&cli.command) {
        Ok(cfg) => cfg,
        Err(UsageError(msg)) => usage_exit(Some(cli.command.name()), &msg),
    };
    match execute(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => runtime_failure(cfg.command, &e),
    }
}
