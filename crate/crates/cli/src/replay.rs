//! Drives a scenario through a private in-process server and reports one
//! line per step.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::sync::Arc;

use leaftutor_client::{Client, ClientError};
use leaftutor_core::config::{Config, ProviderKind};
use leaftutor_core::service::RunRequest;
use leaftutor_core::{AssignmentSettings, Id, TutorService};

use crate::scenario::{LoadedScenario, LoadedStep, ScenarioInvalid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub label: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub scenario: String,
    /// Failure while preparing the course, materials or session.
    pub setup_error: Option<String>,
    pub steps: Vec<StepReport>,
}

impl ReplayReport {
    pub fn count(&self, v: Verdict) -> usize {
        self.steps.iter().filter(|s| s.verdict == v).count()
    }

    pub fn passed(&self) -> bool {
        self.setup_error.is_none() && self.count(Verdict::Fail) == 0
    }

    /// Step with the given verdict, by label prefix (`"run"`, `"say"`, ...).
    pub fn steps_of(&self, prefix: &str) -> impl Iterator<Item = &StepReport> {
        let prefix = prefix.to_owned();
        self.steps.iter().filter(move |s| s.label.starts_with(&prefix))
    }
}

/// Contains no ids, timestamps or timings, so repeated replays match byte for byte.
impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {}: {} (pass {}, fail {}, skipped {})",
            self.scenario,
            if self.passed() { "PASS" } else { "FAIL" },
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::Skipped),
        )?;
        if let Some(e) = &self.setup_error {
            writeln!(f, "  setup: FAIL {e}")?;
        }
        for (i, s) in self.steps.iter().enumerate() {
            write!(f, "  [{}] {} ... {}", i + 1, s.label, s.verdict.as_str())?;
            if s.detail.is_empty() {
                writeln!(f)?;
            } else {
                writeln!(f, ": {}", s.detail)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Invalid(#[from] ScenarioInvalid),
    #[error("could not start the replay service: {0}")]
    Startup(String),
}

const STUDENT_ID: &str = "replay-student";

fn clip(text: &str, max: usize) -> String {
    let flat = text.replace('\n', "\\n");
    if flat.chars().count() <= max {
        flat
    } else {
        let mut s: String = flat.chars().take(max).collect();
        s.push_str("...");
        s
    }
}

fn api_error(e: &ClientError) -> String {
    match e {
        ClientError::Api { code, message, .. } => format!("{code}: {message}"),
        other => other.to_string(),
    }
}

/// Loads and replays one scenario file against a fresh temporary store.
pub async fn replay_file(path: &Path) -> Result<ReplayReport, ReplayError> {
    let loaded = LoadedScenario::load(path)?;
    replay(&loaded).await
}

pub async fn replay(loaded: &LoadedScenario) -> Result<ReplayReport, ReplayError> {
    let dir = tempfile::tempdir().map_err(|e| ReplayError::Startup(e.to_string()))?;
    let mut cfg = Config {
        store: dir.path().join("store"),
        ..Config::default()
    };
    cfg.llm.provider = Some(ProviderKind::Scripted);
    cfg.llm.script_path = Some(loaded.script_path.clone());
    cfg.sandbox.work_root = Some(dir.path().join("jobs"));
    std::fs::create_dir_all(dir.path().join("jobs")).map_err(|e| ReplayError::Startup(e.to_string()))?;
    let service = Arc::new(TutorService::from_config(&cfg).map_err(|e| ReplayError::Startup(e.to_string()))?);

    // Tokens are minted out of band, the way the admin commands do it.
    let (_, instructor_token) = service
        .bootstrap_instructor("replay")
        .map_err(|e| ReplayError::Startup(e.to_string()))?;
    let student = Id::parse(STUDENT_ID).expect("constant id");
    let student_token = service
        .issue_student_token(&student)
        .map_err(|e| ReplayError::Startup(e.to_string()))?;

    let server = leaftutor_server::spawn_local(service)
        .await
        .map_err(|e| ReplayError::Startup(e.to_string()))?;
    let base = Client::new(server.base_url());
    let instructor = base.with_token(instructor_token.token);
    let student_client = base.with_token(student_token.token);

    let mut report = ReplayReport {
        scenario: loaded.scenario.name.clone(),
        setup_error: None,
        steps: Vec::new(),
    };
    match setup(loaded, &instructor, &student_client, &student).await {
        Ok(session) => run_steps(loaded, &student_client, &session, &mut report).await,
        Err(e) => report.setup_error = Some(e),
    }
    let _ = server.stop().await;
    Ok(report)
}

async fn setup(
    loaded: &LoadedScenario,
    instructor: &Client,
    student_client: &Client,
    student: &Id,
) -> Result<Id, String> {
    let s = &loaded.scenario;
    let course = instructor
        .create_course(&format!("replay {}", s.name))
        .await
        .map_err(|e| format!("create course: {}", api_error(&e)))?;
    instructor
        .add_students(&course.course_id, std::slice::from_ref(student))
        .await
        .map_err(|e| format!("roster: {}", api_error(&e)))?;
    let settings = AssignmentSettings {
        expected_output: s.expected_output.clone(),
        stdin: s.stdin.clone(),
        language: s.language.clone(),
        entrypoint: s.entrypoint.clone(),
        reveal_solutions: false,
    };
    let assignment = instructor
        .create_assignment(&course.course_id, &s.name, settings)
        .await
        .map_err(|e| format!("create assignment: {}", api_error(&e)))?;
    for m in &loaded.materials {
        instructor
            .upload_material(&assignment.assignment_id, m.kind.as_str(), &m.filename, m.bytes.clone())
            .await
            .map_err(|e| format!("upload {}: {}", m.filename, api_error(&e)))?;
    }
    let session = student_client
        .start_session(&assignment.assignment_id)
        .await
        .map_err(|e| format!("start session: {}", api_error(&e)))?;
    if !loaded.files.is_empty() {
        student_client
            .put_files(&session.session_id, loaded.files.clone())
            .await
            .map_err(|e| format!("upload files: {}", api_error(&e)))?;
    }
    Ok(session.session_id)
}

async fn run_steps(loaded: &LoadedScenario, client: &Client, session: &Id, report: &mut ReplayReport) {
    let mut last_reply: Option<String> = None;
    for step in &loaded.steps {
        let (label, verdict, detail) = match step {
            LoadedStep::Say(text) => {
                let label = format!("say {:?}", clip(text, 60));
                match client.send_message(session, text).await {
                    Ok(turn) => {
                        last_reply = Some(turn.text);
                        (label, Verdict::Pass, String::new())
                    }
                    Err(e) => {
                        last_reply = None;
                        (label, Verdict::Fail, api_error(&e))
                    }
                }
            }
            LoadedStep::ExpectReplyContains(needle) => {
                let label = format!("expect reply contains {needle:?}");
                match &last_reply {
                    Some(r) if r.contains(needle.as_str()) => (label, Verdict::Pass, String::new()),
                    Some(r) => (label, Verdict::Fail, format!("reply was {:?}", clip(r, 160))),
                    None => (label, Verdict::Fail, "no reply to inspect".into()),
                }
            }
            LoadedStep::Run {
                expected,
                stderr_matches,
            } => {
                let label = format!("run expect {expected}");
                match client.run(session, &RunRequest::default()).await {
                    Ok(result) => {
                        let stderr = format!("{}{}", result.compile_stderr, result.run_stderr);
                        let mut problems = Vec::new();
                        if result.status != *expected {
                            problems.push(format!("status {} != {}", result.status, expected));
                        }
                        if let Some(re) = stderr_matches {
                            if !re.is_match(&stderr) {
                                problems.push(format!("stderr {:?} does not match /{}/", clip(&stderr, 160), re));
                            }
                        }
                        if problems.is_empty() {
                            (label, Verdict::Pass, String::new())
                        } else {
                            (label, Verdict::Fail, problems.join("; "))
                        }
                    }
                    Err(e) if e.code() == Some("TOOLCHAIN_MISSING") => (label, Verdict::Skipped, api_error(&e)),
                    Err(e) => (label, Verdict::Fail, api_error(&e)),
                }
            }
        };
        report.steps.push(StepReport { label, verdict, detail });
    }
}

/// Concatenated reports of several scenarios.
pub fn render_all(reports: &[ReplayReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = write!(out, "{r}");
    }
    out
}
