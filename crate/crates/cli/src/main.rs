//! `ucutlass` command-line entry point.
//!
//! Data goes to stdout; diagnostics go to stderr as one JSON object per line.
//! Exit codes: 0 success, 1 validation or domain error, 2 usage error.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ucutlass::compile::ErrorRecord;

#[derive(Parser)]
#[command(name = "ucutlass", version, about = "Compile uCUTLASS kernel programs and analyze optimization runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a DSL program to a CUTLASS header.
    Compile(CompileArgs),
    /// Speed-of-light bound for a problem on a GPU.
    Sol(SolArgs),
    /// Rank optimization hypotheses by gap-aware ROI.
    Triage(TriageArgs),
    /// Replay attempt logs under one early-stopping policy.
    Replay(ReplayArgs),
    /// Replay attempt logs over a grid of policies.
    Sweep(SweepArgs),
    /// Summaries, Fast-p curves and signed areas of speedup tables.
    Metrics(MetricsArgs),
    /// Run the integrity detectors over attempt logs.
    Review(ReviewArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// DSL source file.
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    file: Option<PathBuf>,
    /// DSL source given inline.
    #[arg(long)]
    text: Option<String>,
    /// Directory for `ucutlass_<hash>.h`; without it the header goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate only; print the namespace and diagnostics.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct SolArgs {
    /// Problem spec (TOML).
    #[arg(long)]
    problem: PathBuf,
    /// Hardware spec (TOML).
    #[arg(long)]
    hardware: PathBuf,
    /// Precision whose peak costs the math.
    #[arg(long, default_value = "fp32")]
    precision: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TriageArgs {
    /// CSV with id,est_speedup,risk_impl,risk_perf[,description].
    hypotheses: PathBuf,
    #[arg(long)]
    t_best: f64,
    #[arg(long)]
    t_sol: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// A `.jsonl` log file or a directory of them.
    logs: PathBuf,
    /// SOL-gap threshold as a fraction, or `off`.
    #[arg(long, default_value = "off")]
    epsilon: String,
    /// No-progress window in attempts; 0 disables it.
    #[arg(long, default_value_t = 0)]
    window: u32,
    #[arg(long, default_value_t = 1)]
    workers: u32,
    /// Per-problem result table (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    logs: PathBuf,
    /// Comma-separated ε values (`off` allowed); default 0.25..3.0 step 0.25.
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<String>,
    /// Comma-separated windows; default 0,4,8,12,16,20.
    #[arg(long, value_delimiter = ',')]
    windows: Vec<u32>,
    /// Retention floor when picking the recommended policy.
    #[arg(long, default_value_t = 0.95)]
    min_retention: f64,
    /// Per-cell, per-problem table (CSV).
    #[arg(long)]
    cells: Option<PathBuf>,
    /// Per-cell cost/speedup table with frontier flags (CSV).
    #[arg(long)]
    pareto: Option<PathBuf>,
    /// Pareto chart (SVG).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Token prices (TOML) for dollar totals.
    #[arg(long)]
    pricing: Option<PathBuf>,
    /// Model whose price applies.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV with problem_id,t_ref,t_best (empty t_best = unsolved).
    speedups: PathBuf,
    /// Second table for a signed-area comparison.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Unsolved problems count as speedup 0 instead of 1.
    #[arg(long)]
    zero_unsolved: bool,
    /// Fast-p curve (CSV).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Export the exact step function instead of the plotting grid.
    #[arg(long)]
    exact: bool,
    /// Fast-p chart (SVG).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Attempt logs for Attempt-Fast-p.
    #[arg(long)]
    logs: Option<PathBuf>,
    /// Speedup target for Attempt-Fast-p.
    #[arg(long, default_value_t = 1.0)]
    target: f64,
    /// Attempt-Fast-p chart (SVG).
    #[arg(long)]
    attempt_plot: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReviewArgs {
    /// Attempt logs; `t_sol` is taken as the FP16 bound.
    #[arg(long)]
    logs: PathBuf,
    /// Reviewer labels: problem_id,index,label[,subcategory].
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Profiles laid out as `<dir>/<problem_id>/<index>.<ext>`.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Kernel-name patterns (TOML with `library` and `user` lists).
    #[arg(long)]
    patterns: Option<PathBuf>,
    /// Outcome table (CSV); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Logs with rejected attempts marked, as JSONL.
    #[arg(long)]
    filtered_logs: Option<PathBuf>,
}

/// A failure with the JSON records to report.
pub enum Failure {
    Usage(String),
    Domain(Vec<serde_json::Value>),
}

impl Failure {
    pub fn domain(stage: &str, message: impl std::fmt::Display) -> Self {
        Failure::Domain(vec![json!({ "stage": stage, "severity": "error", "message": message.to_string() })])
    }

    pub fn records(records: &[ErrorRecord]) -> Self {
        Failure::Domain(records.iter().map(|r| serde_json::to_value(r).expect("records serialize")).collect())
    }
}

pub fn diag(v: &serde_json::Value) {
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            diag(&json!({ "stage": "usage", "severity": "error", "message": first }));
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Compile(a) => commands::compile(a),
        Command::Sol(a) => commands::sol(a),
        Command::Triage(a) => commands::triage(a),
        Command::Replay(a) => commands::replay(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Review(a) => commands::review(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            diag(&json!({ "stage": "usage", "severity": "error", "message": message }));
            ExitCode::from(2)
        }
        Err(Failure::Domain(records)) => {
            records.iter().for_each(diag);
            ExitCode::from(1)
        }
    }
}
