use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported material kind `{0}`")]
    UnsupportedKind(String),
    #[error("upload is not valid UTF-8 text")]
    NotText,
    #[error("upload of {size} bytes exceeds the {limit} byte limit")]
    TooLarge { size: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unknown assignment {0}")]
    UnknownAssignment(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("{kind} {id} already exists")]
    Conflict { kind: &'static str, id: String },
    #[error("a request is already in flight for session {0}")]
    Busy(String),
    #[error("missing or expired credentials")]
    Unauthorized,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("query is empty")]
    EmptyQuery,
    #[error("LLM provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("LLM provider did not answer within {0} ms")]
    ProviderTimeout(u64),
    #[error("no scripted response matches `{0}`")]
    ScriptMiss(String),
    #[error("unknown language profile `{0}`")]
    UnknownProfile(String),
    #[error("language profile `{0}` is already registered")]
    DuplicateProfile(String),
    #[error("toolchain binary `{0}` is not installed")]
    ToolchainMissing(String),
    #[error("could not stage job files: {0}")]
    StagingFailed(String),
    #[error("invalid execution job: {0}")]
    InvalidJob(String),
    #[error("atomic write failed: {0}")]
    AtomicWriteFailed(String),
    #[error("store schema version {found} is newer than supported version {supported}")]
    SchemaTooNew { found: u32, supported: u32 },
    #[error("corrupt store data: {0}")]
    Corrupt(String),
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("serialization failure: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code used on the wire and in logs.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnsupportedKind(_) => "UNSUPPORTED_KIND",
            Error::NotText => "NOT_TEXT",
            Error::TooLarge { .. } => "TOO_LARGE",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Validation(_) => "VALIDATION",
            Error::UnknownAssignment(_) => "UNKNOWN_ASSIGNMENT",
            Error::UnknownSession(_) => "UNKNOWN_SESSION",
            Error::NotFound { .. } => "NOT_FOUND",
            Error::Conflict { .. } => "CONFLICT",
            Error::Busy(_) => "BUSY",
            Error::Unauthorized => "UNAUTHORIZED",
            Error::Forbidden(_) => "FORBIDDEN",
            Error::EmptyQuery => "EMPTY_QUERY",
            Error::ProviderUnavailable(_) => "PROVIDER_UNAVAILABLE",
            Error::ProviderTimeout(_) => "PROVIDER_TIMEOUT",
            Error::ScriptMiss(_) => "SCRIPT_MISS",
            Error::UnknownProfile(_) => "UNKNOWN_PROFILE",
            Error::DuplicateProfile(_) => "DUPLICATE_PROFILE",
            Error::ToolchainMissing(_) => "TOOLCHAIN_MISSING",
            Error::StagingFailed(_) => "STAGING_FAILED",
            Error::InvalidJob(_) => "INVALID_JOB",
            Error::AtomicWriteFailed(_) => "ATOMIC_WRITE_FAILED",
            Error::SchemaTooNew { .. } => "SCHEMA_TOO_NEW",
            Error::Corrupt(_) => "CORRUPT",
            Error::Io(_) => "IO_FAILED",
            Error::Json(_) => "IO_FAILED",
        }
    }
}
