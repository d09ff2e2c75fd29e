//! Complexity fingerprints from an external sandboxed runner.
//!
//! The runner is invoked as `<program> [args..] <solution file> <tests dir>
//! <timeout seconds>` and prints one line: `<exit status> <wall seconds>
//! <peak bytes>`.

use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::ComplexityFingerprint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("execution failed: {0}")]
    ExecutionFailed(String),
    #[error("execution timed out")]
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub exit_status: i32,
    pub wall_s: f64,
    pub peak_bytes: f64,
}

pub trait Executor {
    fn run(&self, solution: &Path, tests: &Path, timeout: Duration) -> Result<RunOutcome, ExecError>;
}

pub const RUNS: usize = 3;

/// Runs the solution three times: median wall time, maximum peak memory.
pub fn measure_fingerprint(
    executor: &dyn Executor,
    solution: &str,
    tests: &Path,
    timeout: Duration,
) -> Result<ComplexityFingerprint, ExecError> {
    if solution.trim().is_empty() {
        return Err(ExecError::ExecutionFailed("empty solution".into()));
    }
    let fail = |e: std::io::Error| ExecError::ExecutionFailed(e.to_string());
    let mut file = tempfile::NamedTempFile::new().map_err(fail)?;
    file.write_all(solution.as_bytes()).map_err(fail)?;
    file.flush().map_err(fail)?;

    let mut times = Vec::with_capacity(RUNS);
    let mut peak: f64 = 0.0;
    for _ in 0..RUNS {
        let out = executor.run(file.path(), tests, timeout)?;
        if out.exit_status != 0 {
            return Err(ExecError::ExecutionFailed(format!("exit status {}", out.exit_status)));
        }
        if !(out.wall_s.is_finite() && out.peak_bytes.is_finite()) {
            return Err(ExecError::ExecutionFailed("non-finite measurement".into()));
        }
        times.push(out.wall_s);
        peak = peak.max(out.peak_bytes);
    }
    times.sort_by(f64::total_cmp);
    Ok(ComplexityFingerprint {
        time_s: times[RUNS / 2],
        mem_bytes: peak,
    })
}

/// Local subprocess runner. It only launches the configured program; the
/// sandboxing is that program's job.
#[derive(Debug, Clone)]
pub struct SubprocessExecutor {
    pub program: PathBuf,
    pub args: Vec<String>,
}

fn parse_outcome(stdout: &str) -> Result<RunOutcome, ExecError> {
    let line = stdout
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| ExecError::ExecutionFailed("runner printed nothing".into()))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    let bad = || ExecError::ExecutionFailed(format!("unparsable runner output {line:?}"));
    if fields.len() != 3 {
        return Err(bad());
    }
    Ok(RunOutcome {
        exit_status: fields[0].parse().map_err(|_| bad())?,
        wall_s: fields[1].parse().map_err(|_| bad())?,
        peak_bytes: fields[2].parse().map_err(|_| bad())?,
    })
}

impl Executor for SubprocessExecutor {
    fn run(&self, solution: &Path, tests: &Path, timeout: Duration) -> Result<RunOutcome, ExecError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(solution)
            .arg(tests)
            .arg(format!("{}", timeout.as_secs_f64()))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| ExecError::ExecutionFailed(format!("cannot start {}: {e}", self.program.display())))?;
        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if start.elapsed() > timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ExecError::Timeout);
                }
                Ok(None) => thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(ExecError::ExecutionFailed(e.to_string())),
            }
        };
        let mut stdout = String::new();
        if let Some(mut out) = child.stdout.take() {
            out.read_to_string(&mut stdout)
                .map_err(|e| ExecError::ExecutionFailed(e.to_string()))?;
        }
        if !status.success() {
            return Err(ExecError::ExecutionFailed(format!("runner exited with {status}")));
        }
        parse_outcome(&stdout)
    }
}
