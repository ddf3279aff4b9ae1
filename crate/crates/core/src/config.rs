//! Service configuration, read from TOML.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! store = "./leaftutor-data"
//! chunk_max_chars = 1000
//! overlap_chars = 200
//!
//! [embedder]
//! name = "hash256"            # or "external"
//!
//! [llm]
//! provider = "scripted"       # or "external"
//! script_path = "fixtures/scripts/demo.json"
//!
//! [sandbox]
//! workers = 4
//!
//! [[sandbox.profiles]]
//! name = "python"
//! file_extension = "py"
//! run_cmd = ["python3", "{main}"]
//! runtime_error_patterns = ["(?m)^Traceback "]
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::DEFAULT_MAX_MATERIAL_BYTES;
use crate::error::{Error, Result};
use crate::ingestion::embed::HASH_EMBEDDER_DIMENSION;
use crate::ingestion::ChunkingConfig;
use crate::retrieval::DEFAULT_TOP_K;
use crate::sandbox::{ExecutionLimits, LanguageProfile, DEFAULT_WORKERS};
use crate::tutor::{PedagogicalPolicy, PromptBudget};

pub const ENV_LLM_ENDPOINT: &str = "LEAFTUTOR_LLM_ENDPOINT";
pub const ENV_LLM_KEY: &str = "LEAFTUTOR_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub listen: SocketAddr,
    pub store: PathBuf,
    pub max_material_bytes: usize,
    pub token_ttl_hours: i64,
    pub retrieval_k: usize,
    pub chunk_max_chars: usize,
    pub overlap_chars: usize,
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
    pub policy: PedagogicalPolicy,
    pub budget: PromptBudget,
    pub sandbox: SandboxConfig,
}

impl Default for Config {
    fn default() -> Self {
        let chunking = ChunkingConfig::default();
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            store: PathBuf::from("leaftutor-data"),
            max_material_bytes: DEFAULT_MAX_MATERIAL_BYTES,
            token_ttl_hours: crate::auth::DEFAULT_TOKEN_TTL_HOURS,
            retrieval_k: DEFAULT_TOP_K,
            chunk_max_chars: chunking.chunk_max_chars,
            overlap_chars: chunking.overlap_chars,
            embedder: EmbedderConfig::default(),
            llm: LlmConfig::default(),
            policy: PedagogicalPolicy::default(),
            budget: PromptBudget::default(),
            sandbox: SandboxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub name: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub dimension: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            name: "hash256".into(),
            endpoint: None,
            model: None,
            dimension: HASH_EMBEDDER_DIMENSION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Scripted,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub provider: Option<ProviderKind>,
    pub script_path: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            provider: None,
            script_path: None,
            endpoint: None,
            model: "gpt-4o-mini".into(),
            api_key: None,
            temperature: 0.0,
            timeout_secs: 60,
        }
    }
}

impl LlmConfig {
    /// Explicit choice, else external when an endpoint is configured.
    pub fn resolved_provider(&self) -> ProviderKind {
        self.provider.unwrap_or(if self.endpoint.is_some() {
            ProviderKind::External
        } else {
            ProviderKind::Scripted
        })
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    pub workers: usize,
    pub limits: ExecutionLimits,
    /// Added to (or replacing same-named) built-in `java` and `script`.
    pub profiles: Vec<LanguageProfile>,
    pub work_root: Option<PathBuf>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
            limits: ExecutionLimits::default(),
            profiles: Vec::new(),
            work_root: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative script paths are resolved against the config file.
        if let (Some(script), Some(base)) = (&cfg.llm.script_path, path.parent()) {
            if script.is_relative() {
                cfg.llm.script_path = Some(base.join(script));
            }
        }
        Ok(cfg)
    }

    /// Applies `LEAFTUTOR_LLM_ENDPOINT` / `LEAFTUTOR_LLM_KEY`.
    pub fn apply_env(&mut self) {
        if let Ok(endpoint) = std::env::var(ENV_LLM_ENDPOINT) {
            if !endpoint.is_empty() {
                self.llm.endpoint = Some(endpoint);
            }
        }
        if let Ok(key) = std::env::var(ENV_LLM_KEY) {
            if !key.is_empty() {
                self.llm.api_key = Some(key);
            }
        }
    }

    pub fn chunking(&self) -> ChunkingConfig {
        ChunkingConfig {
            chunk_max_chars: self.chunk_max_chars,
            overlap_chars: self.overlap_chars,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chunking().validate()?;
        self.policy.validate()?;
        self.budget.validate(&self.policy)?;
        if self.retrieval_k == 0 {
            return Err(Error::InvalidConfig("retrieval_k must be at least 1".into()));
        }
        if self.token_ttl_hours <= 0 {
            return Err(Error::InvalidConfig("token_ttl_hours must be positive".into()));
        }
        Ok(())
    }
}
