//! Replay scenario files.
//!
//! ```json
//! {
//!   "name": "runtime",
//!   "language": "script",
//!   "entrypoint": "main.sh",
//!   "materials": [{"kind": "SOLUTION", "path": "../materials/array_tree/Solution.java"}],
//!   "session_files": ["../code/array_tree/main.sh"],
//!   "script_path": "../scripts/runtime.json",
//!   "steps": [
//!     {"run": {"expected_status": "RUNTIME_ERROR", "stderr_matches": "ArrayIndexOutOfBounds"}},
//!     {"say": "Index out of bound, but I cannot move on"},
//!     {"expect_reply_contains": "index"}
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the scenario file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use leaftutor_core::{ExecStatus, MaterialKind};
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
#[error("SCENARIO_INVALID: {0}")]
pub struct ScenarioInvalid(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Sandbox profile used by run steps.
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default = "default_entrypoint")]
    pub entrypoint: String,
    #[serde(default)]
    pub expected_output: Option<String>,
    #[serde(default)]
    pub stdin: Option<String>,
    #[serde(default)]
    pub materials: Vec<MaterialRef>,
    #[serde(default)]
    pub session_files: Vec<PathBuf>,
    pub script_path: PathBuf,
    pub steps: Vec<Step>,
}

fn default_language() -> String {
    "java".into()
}

fn default_entrypoint() -> String {
    "Main.java".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRef {
    pub kind: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Say(String),
    Run(RunExpectation),
    ExpectReplyContains(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunExpectation {
    pub expected_status: String,
    /// Regex searched in the compile and run stderr.
    #[serde(default)]
    pub stderr_matches: Option<String>,
}

/// A scenario with every referenced file read and every field checked.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub materials: Vec<LoadedMaterial>,
    pub files: BTreeMap<String, String>,
    pub script_path: PathBuf,
    pub steps: Vec<LoadedStep>,
}

#[derive(Debug, Clone)]
pub struct LoadedMaterial {
    pub kind: MaterialKind,
    pub filename: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub enum LoadedStep {
    Say(String),
    Run {
        expected: ExecStatus,
        stderr_matches: Option<Regex>,
    },
    ExpectReplyContains(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioInvalid {
    ScenarioInvalid(msg.into())
}

fn file_name(path: &Path) -> Result<String, ScenarioInvalid> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .ok_or_else(|| invalid(format!("{} has no file name", path.display())))
}

impl Scenario {
    pub fn parse(json: &str) -> Result<Self, ScenarioInvalid> {
        serde_json::from_str(json).map_err(|e| invalid(e.to_string()))
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<Vec<LoadedStep>, ScenarioInvalid> {
        if self.name.trim().is_empty() {
            return Err(invalid("name is empty"));
        }
        if self.steps.is_empty() {
            return Err(invalid("steps is empty"));
        }
        let mut said = false;
        self.steps
            .iter()
            .enumerate()
            .map(|(i, step)| {
                let n = i + 1;
                Ok(match step {
                    Step::Say(text) => {
                        if text.trim().is_empty() {
                            return Err(invalid(format!("step {n}: say text is empty")));
                        }
                        said = true;
                        LoadedStep::Say(text.clone())
                    }
                    Step::Run(r) => LoadedStep::Run {
                        expected: r
                            .expected_status
                            .parse()
                            .map_err(|_| invalid(format!("step {n}: unknown status `{}`", r.expected_status)))?,
                        stderr_matches: r
                            .stderr_matches
                            .as_deref()
                            .map(Regex::new)
                            .transpose()
                            .map_err(|e| invalid(format!("step {n}: {e}")))?,
                    },
                    Step::ExpectReplyContains(s) => {
                        if !said {
                            return Err(invalid(format!("step {n}: expect_reply_contains before any say")));
                        }
                        LoadedStep::ExpectReplyContains(s.clone())
                    }
                })
            })
            .collect()
    }
}

impl LoadedScenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioInvalid> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let scenario = Scenario::parse(&text)?;
        let steps = scenario.validate()?;
        let base = path.parent().unwrap_or(Path::new("."));
        let read = |p: &Path| {
            let full = base.join(p);
            std::fs::read(&full).map_err(|e| invalid(format!("{}: {e}", full.display())))
        };

        let materials = scenario
            .materials
            .iter()
            .map(|m| {
                Ok(LoadedMaterial {
                    kind: m
                        .kind
                        .parse()
                        .map_err(|_| invalid(format!("unknown material kind `{}`", m.kind)))?,
                    filename: file_name(&m.path)?,
                    bytes: read(&m.path)?,
                })
            })
            .collect::<Result<Vec<_>, ScenarioInvalid>>()?;

        let mut files = BTreeMap::new();
        for p in &scenario.session_files {
            let body = String::from_utf8(read(p)?).map_err(|_| invalid(format!("{} is not UTF-8", p.display())))?;
            if files.insert(file_name(p)?, body).is_some() {
                return Err(invalid(format!("duplicate session file name {}", p.display())));
            }
        }
        let has_run = steps.iter().any(|s| matches!(s, LoadedStep::Run { .. }));
        if has_run && !files.contains_key(&scenario.entrypoint) {
            return Err(invalid(format!(
                "entrypoint `{}` is not among session_files",
                scenario.entrypoint
            )));
        }

        let script_path = base.join(&scenario.script_path);
        if !script_path.is_file() {
            return Err(invalid(format!("script {} not found", script_path.display())));
        }
        Ok(Self {
            scenario,
            materials,
            files,
            script_path,
            steps,
        })
    }
}
