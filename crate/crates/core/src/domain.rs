//! Shared record types.
//!
//! Every type here is a plain value: constructed once, then shared or sent
//! between threads freely. JSON field names are snake_case and enums
//! serialize as uppercase strings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::id::Id;

/// Default cap on a single material upload (2 MiB).
pub const DEFAULT_MAX_MATERIAL_BYTES: usize = 2 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instructor {
    pub instructor_id: Id,
    pub name: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Course {
    pub course_id: Id,
    pub title: String,
    pub instructor_id: Id,
    pub roster: BTreeSet<Id>,
    pub created_at: DateTime<Utc>,
}

/// Per-assignment knobs an instructor controls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignmentSettings {
    /// Sample output from the assignment document; `/run` compares against it.
    pub expected_output: Option<String>,
    pub stdin: Option<String>,
    /// Language profile used by `/run`.
    pub language: String,
    pub entrypoint: String,
    /// Lets sample-solution chunks reach the prompt verbatim.
    pub reveal_solutions: bool,
}

impl Default for AssignmentSettings {
    fn default() -> Self {
        Self {
            expected_output: None,
            stdin: None,
            language: "java".into(),
            entrypoint: "Main.java".into(),
            reveal_solutions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment_id: Id,
    pub course_id: Id,
    pub title: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub settings: AssignmentSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MaterialKind {
    Instructions,
    Solution,
    Lecture,
    Remarks,
}

impl MaterialKind {
    pub const ALL: [MaterialKind; 4] = [
        MaterialKind::Instructions,
        MaterialKind::Solution,
        MaterialKind::Lecture,
        MaterialKind::Remarks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MaterialKind::Instructions => "INSTRUCTIONS",
            MaterialKind::Solution => "SOLUTION",
            MaterialKind::Lecture => "LECTURE",
            MaterialKind::Remarks => "REMARKS",
        }
    }
}

impl fmt::Display for MaterialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaterialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MaterialKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnsupportedKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Material {
    pub material_id: Id,
    pub assignment_id: Id,
    pub kind: MaterialKind,
    pub filename: String,
    pub content: String,
    pub content_hash: String,
    pub uploaded_at: DateTime<Utc>,
}

/// Hex SHA-256 of the content bytes.
pub fn content_hash(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

/// Checks an instructor upload and builds the (not yet persisted) material.
pub fn validate_material_upload(
    assignment_id: &Id,
    kind: &str,
    filename: &str,
    bytes: &[u8],
    max_bytes: usize,
) -> Result<Material> {
    let kind: MaterialKind = kind.parse()?;
    if bytes.len() > max_bytes {
        return Err(Error::TooLarge {
            size: bytes.len(),
            limit: max_bytes,
        });
    }
    let content = std::str::from_utf8(bytes).map_err(|_| Error::NotText)?;
    validate_filename(filename)?;
    Ok(Material {
        material_id: Id::new(),
        assignment_id: assignment_id.clone(),
        kind,
        filename: filename.to_owned(),
        content_hash: content_hash(content),
        content: content.to_owned(),
        uploaded_at: Utc::now(),
    })
}

/// Relative path made of plain components: no `..`, no absolute paths, no
/// backslashes or NULs.
pub fn validate_filename(name: &str) -> Result<()> {
    let bad = |why: &str| Err(Error::Validation(format!("filename `{name}` {why}")));
    if name.is_empty() || name.len() > 255 {
        return bad("must be 1..=255 bytes");
    }
    if name.starts_with('/') || name.contains('\\') || name.contains('\0') {
        return bad("must be a relative path");
    }
    if name.split('/').any(|c| c.is_empty() || c == "." || c == "..") {
        return bad("contains an empty, `.` or `..` component");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: Id,
    pub material_id: Id,
    pub seq: usize,
    pub text: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Student,
    Tutor,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Student => "STUDENT",
            Role::Tutor => "TUTOR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub index: usize,
    pub role: Role,
    pub text: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExecStatus {
    Ok,
    WrongOutput,
    CompileError,
    RuntimeError,
    Timeout,
}

impl ExecStatus {
    pub const ALL: [ExecStatus; 5] = [
        ExecStatus::Ok,
        ExecStatus::WrongOutput,
        ExecStatus::CompileError,
        ExecStatus::RuntimeError,
        ExecStatus::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Ok => "OK",
            ExecStatus::WrongOutput => "WRONG_OUTPUT",
            ExecStatus::CompileError => "COMPILE_ERROR",
            ExecStatus::RuntimeError => "RUNTIME_ERROR",
            ExecStatus::Timeout => "TIMEOUT",
        }
    }
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExecStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExecStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("`{s}` is not an execution status")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub compile_stdout: String,
    pub compile_stderr: String,
    pub run_stdout: String,
    pub run_stderr: String,
    pub exit_code: Option<i32>,
    pub wall_ms: u64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorSession {
    pub session_id: Id,
    pub assignment_id: Id,
    pub student_id: Id,
    pub turns: Vec<ChatTurn>,
    pub files: BTreeMap<String, String>,
    pub last_execution: Option<ExecutionResult>,
    pub created_at: DateTime<Utc>,
}

impl TutorSession {
    pub fn new(assignment_id: Id, student_id: Id) -> Self {
        Self {
            session_id: Id::new(),
            assignment_id,
            student_id,
            turns: Vec::new(),
            files: BTreeMap::new(),
            last_execution: None,
            created_at: Utc::now(),
        }
    }

    /// Appends a turn with the next index and returns that index.
    pub fn push_turn(&mut self, role: Role, text: impl Into<String>) -> usize {
        let index = self.turns.len();
        self.turns.push(ChatTurn {
            index,
            role,
            text: text.into(),
            at: Utc::now(),
        });
        index
    }

    /// Turn-order invariant: indices are 0..n, the first turn is a student
    /// turn, and every tutor turn answers the student turn right before it.
    /// Consecutive student turns are allowed; they record requests whose
    /// provider call failed.
    pub fn turns_well_formed(&self) -> bool {
        self.turns.iter().enumerate().all(|(i, t)| {
            t.index == i
                && !t.text.is_empty()
                && match t.role {
                    Role::Student => true,
                    Role::Tutor => i > 0 && self.turns[i - 1].role == Role::Student,
                }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TutorEvent {
    pub event_id: Id,
    pub session_id: Id,
    pub assignment_id: Id,
    /// Index of the student turn that was answered.
    pub turn_index: usize,
    pub query_text: String,
    pub retrieved_chunk_ids: Vec<Id>,
    pub prompt_chars: usize,
    pub response_chars: usize,
    pub at: DateTime<Utc>,
}
