//! `verigrade` — command-line pipeline over the grading toolkit.
//!
//! Exit codes: 0 success, 1 domain verdict failure (parse error, invalid
//! testbench, bad data), 2 usage error, 3 infrastructure error (simulator
//! missing, I/O during simulation).
//!
//! Simulator configuration precedence: flags > environment variables
//! (`VERIGRADE_COMPILE_CMD`, `VERIGRADE_RUN_CMD`, `VERIGRADE_TIMEOUT_SECS`,
//! `VERIGRADE_WORKDIR`) > config file (`--config`) > defaults (Icarus
//! Verilog).

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "verigrade", version, about = "Score generated Verilog against golden references", long_about = None)]
struct Cli {
    /// Emit machine-readable JSON (one document per result line).
    #[arg(long, global = true)]
    json: bool,

    /// Optional TOML config file (simulator templates, thresholds).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct SimArgs {
    /// Compile command template with {sources} and {out} placeholders.
    #[arg(long, value_name = "TEMPLATE")]
    compile_cmd: Option<String>,

    /// Run command template with a {binary} placeholder.
    #[arg(long, value_name = "TEMPLATE")]
    run_cmd: Option<String>,

    /// Per-phase simulation timeout in seconds [default: 30].
    #[arg(long, value_name = "SECS")]
    timeout_secs: Option<f64>,

    /// Root directory for per-run scratch directories.
    #[arg(long, value_name = "DIR")]
    workdir: Option<PathBuf>,

    /// Concurrent simulations (0 = one per CPU) [default: 0].
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse one Verilog file and dump the AST as canonical JSON.
    Parse {
        /// Verilog source file.
        file: PathBuf,
    },

    /// Structural similarity score between a golden and a candidate file.
    AstScore {
        golden: PathBuf,
        candidate: PathBuf,
        /// Category weights file (TOML, `category = weight` pairs).
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
    },

    /// Tiered reward for one candidate against a dataset sample.
    Score {
        /// Dataset sample (JSON object with prompt/golden_code/testbench/golden_trace).
        #[arg(long, value_name = "FILE")]
        sample: PathBuf,
        candidate: PathBuf,
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },

    /// Score a whole candidate group and report group statistics.
    ScoreGroup {
        #[arg(long, value_name = "FILE")]
        sample: PathBuf,
        /// Candidate files, in rollout order (at least 2).
        #[arg(required = true, num_args = 2..)]
        candidates: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },

    /// Normalize reward groups into advantages (JSONL in, JSONL out).
    GrpoAdvantage {
        /// Input: one {"prompt_id", "rewards": [..]} document per line.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Numerical stability constant added to the reward std.
        #[arg(long, default_value_t = 1e-8)]
        delta_stab: f64,
    },

    /// Evaluate the clipped-surrogate group objective over log-prob records.
    GrpoObjective {
        /// Input: one candidate record per line, grouped by prompt_id.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Clip range for the importance ratio.
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// KL penalty coefficient.
        #[arg(long, default_value_t = 0.04)]
        beta_kl: f64,
        #[arg(long, default_value_t = 1e-8)]
        delta_stab: f64,
        /// Expected candidates per prompt; 0 accepts whatever each group has.
        #[arg(long, default_value_t = 8)]
        group_size: usize,
        /// Also emit analytic per-token gradients (JSON mode only).
        #[arg(long)]
        gradients: bool,
    },

    /// Filter a scored dataset and split it into hard/simple buckets.
    Filter {
        /// Dataset file (JSONL, one sample per line).
        data: PathBuf,
        /// Rewards file (JSONL: {"sample_id", "rewards": [k values]}).
        #[arg(long, value_name = "FILE")]
        rewards: PathBuf,
        /// Output base path; writes <base>.hard.jsonl, <base>.simple.jsonl,
        /// <base>.report.json. Defaults to the data path minus extension.
        #[arg(long, value_name = "BASE")]
        output_base: Option<PathBuf>,
        /// Candidates per sample.
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Minimum acceptable mean reward.
        #[arg(long, default_value_t = 0.3)]
        alpha_min: f64,
        /// Maximum acceptable mean reward.
        #[arg(long, default_value_t = 1.8)]
        alpha_max: f64,
        /// Minimum acceptable reward standard deviation (strict).
        #[arg(long, default_value_t = 0.1)]
        beta_min_std: f64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },

    /// Validate a testbench against known-good and known-bad implementations.
    ValidateTb {
        /// Golden implementation. Not needed when --sample is given.
        #[arg(long, value_name = "FILE", required_unless_present = "sample")]
        golden: Option<PathBuf>,
        /// Testbench file. Not needed when --sample is given.
        #[arg(long, value_name = "FILE", required_unless_present = "sample")]
        testbench: Option<PathBuf>,
        /// Dataset sample; uses its golden/testbench/saved trace.
        #[arg(long, value_name = "FILE")]
        sample: Option<PathBuf>,
        /// Known-bad implementation files.
        #[arg(long, value_name = "FILE", num_args = 1..)]
        bad: Vec<PathBuf>,
        /// Derive known-bad implementations by mutating the golden.
        #[arg(long)]
        auto_mutants: bool,
        #[command(flatten)]
        sim: SimArgs,
    },

    /// Generate single-site mutants of a golden implementation.
    Mutate {
        golden: PathBuf,
        /// Directory to write mutant files into; stdout when omitted.
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
}

/// Failures mapped onto the documented exit codes.
pub enum CliError {
    /// Bad invocation or unreadable input path.
    Usage(String),
    /// The toolkit ran and the verdict is negative or the data invalid.
    Domain(String),
    /// The environment is broken: simulator missing, I/O failures.
    Infra(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
            CliError::Infra(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Infra(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("verigrade: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
