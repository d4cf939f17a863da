//! Client side of the execution harness: one JSON job on the child's stdin,
//! one JSON verdict line back on its stdout.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SandboxUnavailable, SyntaxChecker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobMode {
    Execute,
    ParseOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub mode: JobMode,
    pub program: String,
    pub timeout_s: f64,
    pub memory_cap_mb: u64,
}

impl Job {
    pub fn execute(program: impl Into<String>, timeout_s: f64) -> Self {
        Job { mode: JobMode::Execute, program: program.into(), timeout_s, memory_cap_mb: 512 }
    }

    pub fn parse_only(program: impl Into<String>) -> Self {
        Job { mode: JobMode::ParseOnly, program: program.into(), timeout_s: 10.0, memory_cap_mb: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    #[serde(alias = "None")]
    None,
    #[serde(alias = "Assertion")]
    Assertion,
    #[serde(alias = "Exception")]
    Exception,
    #[serde(alias = "Timeout")]
    Timeout,
    #[serde(alias = "Syntax")]
    Syntax,
}

/// A verdict as delivered by the harness process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub error_kind: VerdictKind,
    #[serde(default)]
    pub detail: String,
    #[serde(default)]
    pub duration_ms: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("harness could not be started: {0}")]
    Unavailable(String),
    #[error("harness infrastructure fault: {0}")]
    Infra(String),
}

/// How to launch the harness and how long to wait beyond the job's own
/// timeout before killing it.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessCommand {
    pub program: String,
    pub args: Vec<String>,
    pub grace: Duration,
}

impl HarnessCommand {
    pub fn new(program: impl Into<String>) -> Self {
        HarnessCommand { program: program.into(), args: Vec::new(), grace: Duration::from_secs(2) }
    }

    pub fn with_args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    /// Split a whitespace-separated command line such as `python3 -m harness`.
    pub fn parse(command_line: &str) -> Option<Self> {
        let mut words = command_line.split_whitespace();
        let program = words.next()?;
        Some(HarnessCommand::new(program).with_args(words))
    }

    pub fn run_job(&self, job: &Job) -> Result<Verdict, HarnessError> {
        let payload = serde_json::to_vec(job).map_err(|e| HarnessError::Infra(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| HarnessError::Unavailable(format!("{}: {e}", self.program)))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(&payload);
        });
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let err_reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + Duration::from_secs_f64(job.timeout_s.max(0.0)) + self.grace;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(HarnessError::Infra(format!(
                        "harness exceeded {:.1}s and was killed",
                        job.timeout_s + self.grace.as_secs_f64()
                    )));
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(HarnessError::Infra(e.to_string())),
            }
        };
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();

        if !status.success() {
            let detail = first_line(&err).or_else(|| first_line(&out)).unwrap_or("no output");
            return Err(HarnessError::Infra(format!("exit {status}: {detail}")));
        }
        parse_verdict_line(&out)
    }
}

fn first_line(text: &str) -> Option<&str> {
    text.lines().map(str::trim).find(|l| !l.is_empty())
}

/// Interpret the harness's stdout. Anything other than a single well-formed
/// verdict (for instance an infrastructure record) is an infra fault.
pub fn parse_verdict_line(stdout: &str) -> Result<Verdict, HarnessError> {
    let line = first_line(stdout).ok_or_else(|| HarnessError::Infra("empty harness output".into()))?;
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| HarnessError::Infra(format!("unparseable output: {e}")))?;
    if value.get("passed").is_none() {
        return Err(HarnessError::Infra(format!("non-verdict record: {line}")));
    }
    let verdict: Verdict =
        serde_json::from_value(value).map_err(|e| HarnessError::Infra(format!("malformed verdict: {e}")))?;
    if verdict.passed != (verdict.error_kind == VerdictKind::None) {
        return Err(HarnessError::Infra(format!("inconsistent verdict: {line}")));
    }
    Ok(verdict)
}

impl SyntaxChecker for HarnessCommand {
    fn parses(&self, source: &str) -> Result<bool, SandboxUnavailable> {
        match self.run_job(&Job::parse_only(source)) {
            Ok(verdict) => Ok(verdict.passed),
            Err(e) => Err(SandboxUnavailable(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_wire_format() {
        let json = serde_json::to_string(&Job::parse_only("def f(:")).unwrap();
        assert_eq!(json, r#"{"mode":"parse_only","program":"def f(:","timeout_s":10.0,"memory_cap_mb":512}"#);
    }

    #[test]
    fn verdict_parsing() {
        let v = parse_verdict_line(
            "{\"passed\":false,\"error_kind\":\"assertion\",\"detail\":\"AssertionError\",\"duration_ms\":12}\n",
        )
        .unwrap();
        assert_eq!(v.error_kind, VerdictKind::Assertion);
        assert!(matches!(parse_verdict_line("{\"infra\":\"fork failed\"}"), Err(HarnessError::Infra(_))));
        assert!(matches!(parse_verdict_line(""), Err(HarnessError::Infra(_))));
        assert!(matches!(
            parse_verdict_line("{\"passed\":true,\"error_kind\":\"timeout\"}"),
            Err(HarnessError::Infra(_))
        ));
    }
}
