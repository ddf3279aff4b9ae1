//! Compile-and-run harness for student code.
//!
//! Each job gets a fresh temporary directory, runs its commands directly
//! (argv, never a shell) in their own process group, and is killed as a
//! group when the wall-clock deadline passes. Captured streams are capped.
//! OS-level containment (containers, seccomp) is left to the deployment.

pub mod classify;
pub mod profile;

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::RwLock;
use regex::Regex;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWriteExt};
use tokio::process::Command;
use tokio::sync::Semaphore;

pub use classify::{classify, normalize_output, ProcessExit};
pub use profile::LanguageProfile;

use crate::domain::{validate_filename, ExecStatus, ExecutionResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionLimits {
    pub wall_ms: u64,
    pub output_cap_bytes: usize,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self {
            wall_ms: 10_000,
            output_cap_bytes: 65_536,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionJob {
    pub files: BTreeMap<String, String>,
    pub entrypoint: String,
    pub profile: String,
    #[serde(default)]
    pub stdin_text: Option<String>,
    #[serde(default)]
    pub expected_output: Option<String>,
    #[serde(default)]
    pub limits: ExecutionLimits,
}

impl ExecutionJob {
    pub fn validate(&self) -> Result<()> {
        if !self.files.contains_key(&self.entrypoint) {
            return Err(Error::InvalidJob(format!(
                "entrypoint `{}` is not among the files",
                self.entrypoint
            )));
        }
        for name in self.files.keys() {
            validate_filename(name).map_err(|e| Error::InvalidJob(e.to_string()))?;
        }
        if self.limits.wall_ms == 0 {
            return Err(Error::InvalidJob("wall_ms must be positive".into()));
        }
        Ok(())
    }
}

struct RegisteredProfile {
    profile: LanguageProfile,
    patterns: Vec<Regex>,
}

/// Bounded pool of job slots plus the registered language profiles.
pub struct Sandbox {
    profiles: RwLock<HashMap<String, Arc<RegisteredProfile>>>,
    slots: Arc<Semaphore>,
    work_root: Option<PathBuf>,
}

pub const DEFAULT_WORKERS: usize = 4;
const FSIZE_LIMIT_BYTES: u64 = 64 * 1024 * 1024;

impl Sandbox {
    /// `workers` jobs run at once; the rest wait in FIFO order.
    pub fn new(workers: usize) -> Self {
        Self {
            profiles: RwLock::default(),
            slots: Arc::new(Semaphore::new(workers.max(1))),
            work_root: None,
        }
    }

    /// Sandbox with the built-in `java` and `script` profiles.
    pub fn with_builtin_profiles(workers: usize) -> Self {
        let sb = Self::new(workers);
        for p in [LanguageProfile::java(), LanguageProfile::script()] {
            sb.register_profile(p).expect("builtin profiles are valid");
        }
        sb
    }

    /// Job directories are created under `dir` instead of the system temp dir.
    pub fn with_work_root(mut self, dir: impl Into<PathBuf>) -> Self {
        self.work_root = Some(dir.into());
        self
    }

    pub fn register_profile(&self, profile: LanguageProfile) -> Result<()> {
        let patterns = profile.compile()?;
        let mut profiles = self.profiles.write();
        if profiles.contains_key(&profile.name) {
            return Err(Error::DuplicateProfile(profile.name));
        }
        profiles.insert(profile.name.clone(), Arc::new(RegisteredProfile { profile, patterns }));
        Ok(())
    }

    pub fn profile_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.profiles.read().keys().cloned().collect();
        names.sort();
        names
    }

    pub async fn execute(&self, job: &ExecutionJob) -> Result<ExecutionResult> {
        let registered = self
            .profiles
            .read()
            .get(&job.profile)
            .cloned()
            .ok_or_else(|| Error::UnknownProfile(job.profile.clone()))?;
        job.validate()?;
        let _slot = self
            .slots
            .clone()
            .acquire_owned()
            .await
            .expect("semaphore never closed");

        let started = Instant::now();
        let deadline = tokio::time::Instant::now() + Duration::from_millis(job.limits.wall_ms);
        let workdir = self.stage(job)?;
        let dir = workdir.path().to_string_lossy().into_owned();
        let profile = &registered.profile;
        let cap = job.limits.output_cap_bytes;

        let mut result = ExecutionResult {
            status: ExecStatus::Ok,
            compile_stdout: String::new(),
            compile_stderr: String::new(),
            run_stdout: String::new(),
            run_stderr: String::new(),
            exit_code: None,
            wall_ms: 0,
            truncated: false,
        };

        let mut compile_exit = None;
        if !profile.compile_cmd.is_empty() {
            let argv = profile::expand(&profile.compile_cmd, &dir, &job.entrypoint);
            let out = run_process(&argv, workdir.path(), None, deadline, cap).await?;
            result.compile_stdout = out.stdout;
            result.compile_stderr = out.stderr;
            result.truncated |= out.truncated;
            if let ProcessExit::Exited(code) = out.exit {
                result.exit_code = Some(code);
            }
            compile_exit = Some(out.exit);
        }

        let mut run_exit = None;
        if compile_exit.is_none_or(ProcessExit::success) {
            let argv = profile::expand(&profile.run_cmd, &dir, &job.entrypoint);
            let out = run_process(&argv, workdir.path(), job.stdin_text.as_deref(), deadline, cap).await?;
            result.run_stdout = out.stdout;
            result.run_stderr = out.stderr;
            result.truncated |= out.truncated;
            result.exit_code = match out.exit {
                ProcessExit::Exited(code) => Some(code),
                _ => None,
            };
            run_exit = Some(out.exit);
        }

        result.status = classify(
            compile_exit,
            run_exit,
            &result.run_stdout,
            &result.run_stderr,
            job.expected_output.as_deref(),
            &registered.patterns,
        );
        drop(workdir);
        result.wall_ms = started.elapsed().as_millis() as u64;
        Ok(result)
    }

    fn stage(&self, job: &ExecutionJob) -> Result<tempfile::TempDir> {
        let staging = |e: io::Error| Error::StagingFailed(e.to_string());
        let mut builder = tempfile::Builder::new();
        builder.prefix("leaftutor-job-");
        let dir = match &self.work_root {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        }
        .map_err(staging)?;
        for (name, source) in &job.files {
            let path = dir.path().join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(staging)?;
            }
            std::fs::write(&path, source).map_err(staging)?;
        }
        Ok(dir)
    }
}

struct ProcessOutput {
    stdout: String,
    stderr: String,
    exit: ProcessExit,
    truncated: bool,
}

/// Reads a stream to EOF, keeping at most `cap` bytes.
async fn read_capped<R: AsyncRead + Unpin>(mut reader: R, cap: usize) -> (Vec<u8>, bool) {
    let mut kept = Vec::new();
    let mut overflow = false;
    let mut buf = [0u8; 8192];
    loop {
        match reader.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
                overflow |= n > room;
            }
        }
    }
    (kept, overflow)
}

/// Lossy UTF-8 decode that still respects the byte cap.
fn decode_capped(bytes: Vec<u8>, cap: usize) -> String {
    let mut s = match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
    };
    if s.len() > cap {
        let mut end = cap;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        s.truncate(end);
    }
    s
}

fn kill_group(pid: Option<u32>) {
    if let Some(pid) = pid {
        // SAFETY: plain syscall; the child leads its own process group.
        unsafe {
            libc::killpg(pid as libc::pid_t, libc::SIGKILL);
        }
    }
}

async fn run_process(
    argv: &[String],
    dir: &Path,
    stdin_text: Option<&str>,
    deadline: tokio::time::Instant,
    cap: usize,
) -> Result<ProcessOutput> {
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(dir)
        .env_clear()
        .env(
            "PATH",
            std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()),
        )
        .env("HOME", dir)
        .env("LANG", "C.UTF-8")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true)
        .process_group(0);
    // SAFETY: only async-signal-safe setrlimit calls between fork and exec.
    unsafe {
        cmd.pre_exec(|| {
            let core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            let fsize = libc::rlimit {
                rlim_cur: FSIZE_LIMIT_BYTES as libc::rlim_t,
                rlim_max: FSIZE_LIMIT_BYTES as libc::rlim_t,
            };
            if libc::setrlimit(libc::RLIMIT_CORE, &core) != 0 || libc::setrlimit(libc::RLIMIT_FSIZE, &fsize) != 0 {
                return Err(io::Error::last_os_error());
            }
            Ok(())
        });
    }
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::ToolchainMissing(argv[0].clone()),
        _ => Error::StagingFailed(format!("spawning `{}`: {e}", argv[0])),
    })?;
    let pid = child.id();

    let stdin = child.stdin.take();
    let input = stdin_text.unwrap_or_default().as_bytes().to_vec();
    let feeder = tokio::spawn(async move {
        if let Some(mut stdin) = stdin {
            let _ = stdin.write_all(&input).await;
        }
    });
    let out_task = tokio::spawn(read_capped(child.stdout.take().expect("piped"), cap));
    let err_task = tokio::spawn(read_capped(child.stderr.take().expect("piped"), cap));

    let exit = match tokio::time::timeout_at(deadline, child.wait()).await {
        Ok(status) => {
            let status = status?;
            match status.code() {
                Some(code) => ProcessExit::Exited(code),
                None => ProcessExit::Signaled,
            }
        }
        Err(_) => {
            kill_group(pid);
            let _ = child.wait().await;
            ProcessExit::TimedOut
        }
    };
    // Background grandchildren may still hold the pipes open.
    kill_group(pid);
    feeder.abort();

    let (stdout, out_over) = out_task.await.unwrap_or_default();
    let (stderr, err_over) = err_task.await.unwrap_or_default();
    Ok(ProcessOutput {
        stdout: decode_capped(stdout, cap),
        stderr: decode_capped(stderr, cap),
        exit,
        truncated: out_over || err_over,
    })
}
