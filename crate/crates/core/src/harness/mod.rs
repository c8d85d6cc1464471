//! External-simulator harness: compile and run candidate + testbench in an
//! isolated scratch directory, capture the output trace, and validate
//! testbenches against known-good/known-bad implementations.
//!
//! The simulator is configured through command templates, so any
//! compile-then-run tool works; the defaults target Icarus Verilog
//! (`iverilog` / `vvp`). Each simulation gets a fresh working directory,
//! removed on success and retained on tool failure for debugging.

mod mutate;
mod trace;

pub use mutate::{mutate_for_validation, MutationOutcome};
pub use trace::{compare_traces, FunctionalVerdict, Mismatch, OutputTrace, VerdictStatus};

use crate::exec;
use crate::frontend::SourceText;
use serde::Serialize;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Hard cap on captured simulator output; runaway simulations are cut off
/// here rather than exhausting memory.
const MAX_CAPTURE_BYTES: usize = 64 * 1024 * 1024;

pub const DEFAULT_COMPILE_TEMPLATE: &str = "iverilog -o {out} {sources}";
pub const DEFAULT_RUN_TEMPLATE: &str = "vvp {binary}";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Minimum vector count a testbench must exercise to be considered valid.
pub const MIN_TEST_VECTORS: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid simulator config: {0}")]
    BadConfig(String),
    #[error("simulator tool `{tool}` could not be started: {source}")]
    ToolMissing {
        tool: String,
        #[source]
        source: std::io::Error,
    },
    #[error("workspace I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("testbench validation needs at least one known-bad implementation")]
    NoKnownBad,
}

/// Command templates and limits for driving the external simulator.
#[derive(Debug, Clone)]
pub struct SimulatorConfig {
    /// Compile command; must contain `{sources}` and `{out}`.
    pub compile_command_template: String,
    /// Run command; must contain `{binary}`.
    pub run_command_template: String,
    /// Wall-clock limit applied to each phase separately.
    pub timeout: Duration,
    /// Parent directory for per-run scratch directories.
    pub workdir_root: PathBuf,
    /// Keep the scratch directory when a phase fails.
    pub keep_failed_workdirs: bool,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            compile_command_template: DEFAULT_COMPILE_TEMPLATE.to_string(),
            run_command_template: DEFAULT_RUN_TEMPLATE.to_string(),
            timeout: DEFAULT_TIMEOUT,
            workdir_root: std::env::temp_dir(),
            keep_failed_workdirs: true,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        for needle in ["{sources}", "{out}"] {
            if !self.compile_command_template.contains(needle) {
                return Err(HarnessError::BadConfig(format!(
                    "compile template is missing the `{needle}` placeholder"
                )));
            }
        }
        if !self.run_command_template.contains("{binary}") {
            return Err(HarnessError::BadConfig(
                "run template is missing the `{binary}` placeholder".to_string(),
            ));
        }
        if self.timeout.is_zero() {
            return Err(HarnessError::BadConfig("timeout must be > 0".to_string()));
        }
        Ok(())
    }
}

/// Result of one compile+run attempt. Tool-level failures carry the
/// retained scratch directory (when configured) and the captured logs.
#[derive(Debug, Clone, Serialize)]
pub enum SimOutcome {
    Completed(OutputTrace),
    CompileFailed {
        log: String,
        #[serde(skip)]
        workdir: Option<PathBuf>,
    },
    TimedOut {
        phase: Phase,
        #[serde(skip)]
        workdir: Option<PathBuf>,
    },
    Crashed {
        exit_code: Option<i32>,
        log: String,
        #[serde(skip)]
        workdir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Compile,
    Run,
}

impl SimOutcome {
    /// Collapses the outcome into a functional verdict, comparing a
    /// completed run against the golden trace.
    pub fn verdict_against(&self, golden: &OutputTrace) -> FunctionalVerdict {
        match self {
            SimOutcome::Completed(trace) => compare_traces(trace, golden),
            SimOutcome::CompileFailed { .. } => {
                FunctionalVerdict::of_status(VerdictStatus::CompileError)
            }
            SimOutcome::TimedOut { .. } => FunctionalVerdict::of_status(VerdictStatus::Timeout),
            SimOutcome::Crashed { .. } => FunctionalVerdict::of_status(VerdictStatus::SimCrash),
        }
    }

    pub fn trace(&self) -> Option<&OutputTrace> {
        match self {
            SimOutcome::Completed(t) => Some(t),
            _ => None,
        }
    }
}

/// Compiles and runs `candidate` with `testbench` in a fresh scratch
/// directory, returning the captured trace or the tool failure. Errors are
/// reserved for infrastructure problems (missing tool, I/O), never for
/// properties of the candidate.
pub fn run_simulation(
    candidate: &SourceText,
    testbench: &SourceText,
    cfg: &SimulatorConfig,
) -> Result<SimOutcome, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.workdir_root)?;
    let workdir = tempfile::Builder::new()
        .prefix("sim-")
        .tempdir_in(&cfg.workdir_root)?;
    let dut_path = workdir.path().join("dut.v");
    let tb_path = workdir.path().join("tb.v");
    let out_path = workdir.path().join("sim.out");
    std::fs::write(&dut_path, &candidate.text)?;
    std::fs::write(&tb_path, &testbench.text)?;

    let sources = [tb_path.clone(), dut_path.clone()];
    let compile_argv = expand_template(
        &cfg.compile_command_template,
        &sources,
        &out_path,
        &out_path,
    );
    let keep = |wd: tempfile::TempDir| -> Option<PathBuf> {
        if cfg.keep_failed_workdirs {
            Some(wd.keep())
        } else {
            None
        }
    };

    match run_command(&compile_argv, workdir.path(), cfg.timeout)? {
        CommandResult::TimedOut => {
            return Ok(SimOutcome::TimedOut {
                phase: Phase::Compile,
                workdir: keep(workdir),
            })
        }
        CommandResult::Finished {
            exit_code, stdout, stderr, ..
        } if exit_code != Some(0) => {
            return Ok(SimOutcome::CompileFailed {
                log: join_logs(&stdout, &stderr),
                workdir: keep(workdir),
            })
        }
        CommandResult::Finished { .. } => {}
    }

    let run_argv = expand_template(&cfg.run_command_template, &sources, &out_path, &out_path);
    match run_command(&run_argv, workdir.path(), cfg.timeout)? {
        CommandResult::TimedOut => Ok(SimOutcome::TimedOut {
            phase: Phase::Run,
            workdir: keep(workdir),
        }),
        CommandResult::Finished {
            exit_code,
            stdout,
            stderr,
        } => {
            if exit_code == Some(0) {
                Ok(SimOutcome::Completed(OutputTrace::from_stdout(&stdout)))
            } else {
                Ok(SimOutcome::Crashed {
                    exit_code,
                    log: join_logs(&stdout, &stderr),
                    workdir: keep(workdir),
                })
            }
        }
    }
}

fn join_logs(stdout: &str, stderr: &str) -> String {
    let mut log = String::new();
    log.push_str(stderr.trim_end());
    if !stdout.trim().is_empty() {
        if !log.is_empty() {
            log.push('\n');
        }
        log.push_str(stdout.trim_end());
    }
    log
}

/// Splits a command template into argv entries (single and double quotes
/// group words) and substitutes `{sources}`, `{out}` and `{binary}`.
/// `{sources}` expands to one argv entry per source file.
fn expand_template(template: &str, sources: &[PathBuf], out: &Path, binary: &Path) -> Vec<String> {
    let mut argv = Vec::new();
    for word in split_words(template) {
        match word.as_str() {
            "{sources}" => argv.extend(sources.iter().map(|p| p.display().to_string())),
            "{out}" => argv.push(out.display().to_string()),
            "{binary}" => argv.push(binary.display().to_string()),
            _ => argv.push(
                word.replace("{out}", &out.display().to_string())
                    .replace("{binary}", &binary.display().to_string()),
            ),
        }
    }
    argv
}

fn split_words(template: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for c in template.chars() {
        match (quote, c) {
            (Some(q), _) if c == q => quote = None,
            (Some(_), _) => cur.push(c),
            (None, '\'' | '"') => quote = Some(c),
            (None, c) if c.is_whitespace() => {
                if !cur.is_empty() {
                    words.push(std::mem::take(&mut cur));
                }
            }
            (None, c) => cur.push(c),
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

enum CommandResult {
    Finished {
        exit_code: Option<i32>,
        stdout: String,
        stderr: String,
    },
    TimedOut,
}

/// Runs one command with a wall-clock limit, draining stdout/stderr on
/// reader threads so a chatty child can never dead-lock the pipe.
fn run_command(argv: &[String], cwd: &Path, timeout: Duration) -> Result<CommandResult, HarnessError> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| HarnessError::BadConfig("empty command template".to_string()))?;
    let mut command = Command::new(program);
    command
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        // Own process group, so a timeout can take down grandchildren
        // (wrapper scripts, forked simulator runtimes) too.
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }
    let mut child = command
        .spawn()
        .map_err(|source| HarnessError::ToolMissing {
            tool: program.clone(),
            source,
        })?;

    let stdout_handle = capture_pipe(child.stdout.take());
    let stderr_handle = capture_pipe(child.stderr.take());

    let deadline = Instant::now() + timeout;
    let finished = loop {
        match child.try_wait()? {
            Some(status) => break Some(status),
            None => {
                if Instant::now() >= deadline {
                    break None;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };

    match finished {
        Some(status) => {
            let stdout = stdout_handle.join().unwrap_or_default();
            let stderr = stderr_handle.join().unwrap_or_default();
            Ok(CommandResult::Finished {
                exit_code: status.code(),
                stdout,
                stderr,
            })
        }
        None => {
            kill_child(&mut child);
            let _ = stdout_handle.join();
            let _ = stderr_handle.join();
            Ok(CommandResult::TimedOut)
        }
    }
}

fn kill_child(child: &mut Child) {
    #[cfg(unix)]
    unsafe {
        libc::kill(-(child.id() as i32), libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn capture_pipe<R: Read + Send + 'static>(
    pipe: Option<R>,
) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut out = Vec::new();
        if let Some(mut pipe) = pipe {
            let mut buf = [0u8; 8192];
            loop {
                match pipe.read(&mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        if out.len() < MAX_CAPTURE_BYTES {
                            out.extend_from_slice(&buf[..n]);
                        }
                    }
                }
            }
        }
        String::from_utf8_lossy(&out).into_owned()
    })
}

/// Per-implementation entry of a validation report.
#[derive(Debug, Clone, Serialize)]
pub struct KnownBadResult {
    pub label: String,
    pub status: VerdictStatus,
    /// True exactly when the implementation produced a `Fail` verdict —
    /// the testbench told it apart from the golden output.
    pub caught: bool,
}

/// Outcome of [`validate_testbench`].
#[derive(Debug, Clone, Serialize)]
pub struct TestbenchValidation {
    /// The golden implementation simulated to completion.
    pub golden_ok: bool,
    pub vector_count: usize,
    pub vector_count_ok: bool,
    pub known_bad: Vec<KnownBadResult>,
    /// Golden trace matches the saved trace, when one was supplied.
    pub saved_trace_ok: Option<bool>,
    pub valid: bool,
    pub notes: Vec<String>,
}

/// Checks that a testbench (a) runs the golden implementation to
/// completion, (b) fails every known-bad implementation, and (c) exercises
/// at least [`MIN_TEST_VECTORS`] vectors. When `saved_trace` is provided
/// the fresh golden trace must also reproduce it exactly.
pub fn validate_testbench(
    golden: &SourceText,
    testbench: &SourceText,
    known_bad: &[SourceText],
    saved_trace: Option<&OutputTrace>,
    cfg: &SimulatorConfig,
    workers: usize,
) -> Result<TestbenchValidation, HarnessError> {
    if known_bad.is_empty() {
        return Err(HarnessError::NoKnownBad);
    }
    let mut notes = Vec::new();
    let golden_outcome = run_simulation(golden, testbench, cfg)?;
    let golden_trace = match golden_outcome.trace() {
        Some(t) => t.clone(),
        None => {
            notes.push(format!(
                "golden implementation did not complete: {:?}",
                golden_outcome.verdict_against(&OutputTrace::default()).status
            ));
            OutputTrace::default()
        }
    };
    let golden_ok = golden_outcome.trace().is_some() && !golden_trace.is_empty();
    let vector_count = golden_trace.vector_count();
    let vector_count_ok = vector_count >= MIN_TEST_VECTORS;
    if !vector_count_ok {
        notes.push(format!(
            "testbench exercises {vector_count} vectors; at least {MIN_TEST_VECTORS} required"
        ));
    }
    let saved_trace_ok = saved_trace.map(|saved| {
        let ok = golden_ok && compare_traces(&golden_trace, saved).is_pass();
        if !ok {
            notes.push("fresh golden trace does not reproduce the saved trace".to_string());
        }
        ok
    });

    let bad_outcomes: Vec<Result<SimOutcome, HarnessError>> = exec::map_bounded(
        known_bad,
        workers,
        |bad| run_simulation(bad, testbench, cfg),
    );
    let mut known_bad_results = Vec::with_capacity(known_bad.len());
    for (bad, outcome) in known_bad.iter().zip(bad_outcomes) {
        let outcome = outcome?;
        let status = outcome.verdict_against(&golden_trace).status;
        let caught = status == VerdictStatus::Fail;
        if !caught {
            notes.push(format!(
                "known-bad `{}` was not caught (status {:?})",
                bad.origin, status
            ));
        }
        known_bad_results.push(KnownBadResult {
            label: bad.origin.clone(),
            status,
            caught,
        });
    }

    let valid = golden_ok
        && vector_count_ok
        && saved_trace_ok.unwrap_or(true)
        && known_bad_results.iter().all(|r| r.caught);
    Ok(TestbenchValidation {
        golden_ok,
        vector_count,
        vector_count_ok,
        known_bad: known_bad_results,
        saved_trace_ok,
        valid,
        notes,
    })
}
