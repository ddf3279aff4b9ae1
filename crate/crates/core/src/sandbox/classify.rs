use regex::Regex;

use crate::domain::ExecStatus;

/// How a child process ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessExit {
    Exited(i32),
    /// Killed by a signal it did not ask for (crash, resource limit).
    Signaled,
    TimedOut,
}

impl ProcessExit {
    pub fn success(self) -> bool {
        self == ProcessExit::Exited(0)
    }
}

/// CRLF to LF, trailing whitespace stripped per line, trailing blank lines
/// dropped.
pub fn normalize_output(s: &str) -> String {
    let s = s.replace("\r\n", "\n");
    let mut lines: Vec<&str> = s.split('\n').map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

/// Maps the observable facts of a job to its status.
///
/// `compile` is `None` when the profile has no compile step; `run` is `None`
/// when the run step never happened.
pub fn classify(
    compile: Option<ProcessExit>,
    run: Option<ProcessExit>,
    run_stdout: &str,
    run_stderr: &str,
    expected_output: Option<&str>,
    runtime_error_patterns: &[Regex],
) -> ExecStatus {
    match compile {
        Some(ProcessExit::TimedOut) => return ExecStatus::Timeout,
        Some(c) if !c.success() => return ExecStatus::CompileError,
        _ => {}
    }
    match run {
        None => ExecStatus::RuntimeError,
        Some(ProcessExit::TimedOut) => ExecStatus::Timeout,
        Some(r) if !r.success() => ExecStatus::RuntimeError,
        Some(_) if runtime_error_patterns.iter().any(|p| p.is_match(run_stderr)) => ExecStatus::RuntimeError,
        Some(_) => match expected_output {
            Some(want) if normalize_output(run_stdout) != normalize_output(want) => ExecStatus::WrongOutput,
            _ => ExecStatus::Ok,
        },
    }
}
