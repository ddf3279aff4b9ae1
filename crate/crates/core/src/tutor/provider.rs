use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tutor::prompt::PromptBundle;

pub const DEFAULT_PROVIDER_TIMEOUT: Duration = Duration::from_secs(60);

#[async_trait]
pub trait LlmProvider: Send + Sync {
    fn name(&self) -> &str;
    async fn complete(&self, bundle: &PromptBundle) -> Result<String>;
}

/// Deterministic stand-in for an LLM: the first entry whose matcher occurs
/// literally in the student's question supplies the reply.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedProvider {
    entries: Vec<(String, String)>,
}

/// On-disk script: either a JSON object (declaration order is kept) or a
/// list of `{"match": ..., "reply": ...}` objects.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Map(IndexMap<String, String>),
    List(Vec<ScriptEntry>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: String,
    pub reply: String,
}

impl ScriptedProvider {
    pub fn new<M, R>(entries: impl IntoIterator<Item = (M, R)>) -> Self
    where
        M: Into<String>,
        R: Into<String>,
    {
        Self {
            entries: entries.into_iter().map(|(m, r)| (m.into(), r.into())).collect(),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ScriptFile =
            serde_json::from_str(json).map_err(|e| Error::InvalidConfig(format!("LLM script: {e}")))?;
        Ok(match file {
            ScriptFile::Map(m) => Self::new(m),
            ScriptFile::List(l) => Self::new(l.into_iter().map(|e| (e.matcher, e.reply))),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("LLM script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn reply_for(&self, user_text: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(m, _)| user_text.contains(m.as_str()))
            .map(|(_, r)| r.as_str())
            .ok_or_else(|| Error::ScriptMiss(user_text.chars().take(80).collect()))
    }
}

#[async_trait]
impl LlmProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    async fn complete(&self, bundle: &PromptBundle) -> Result<String> {
        self.reply_for(&bundle.user_text).map(str::to_owned)
    }
}

#[derive(Debug, Clone)]
pub struct ExternalProviderConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout: Duration,
}

/// Chat-completion client (`POST {endpoint}` with a `messages` array).
pub struct ExternalProvider {
    http: reqwest::Client,
    config: ExternalProviderConfig,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 2],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

impl ExternalProvider {
    pub fn new(config: ExternalProviderConfig) -> Result<Self> {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("LLM client: {e}")))?;
        Ok(Self { http, config })
    }
}

#[async_trait]
impl LlmProvider for ExternalProvider {
    fn name(&self) -> &str {
        "external"
    }

    async fn complete(&self, bundle: &PromptBundle) -> Result<String> {
        let user = bundle.render_user_message();
        let body = ChatRequest {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages: [
                ChatMessage {
                    role: "system",
                    content: &bundle.system_text,
                },
                ChatMessage {
                    role: "user",
                    content: &user,
                },
            ],
        };
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                Error::ProviderTimeout(self.config.timeout.as_millis() as u64)
            } else {
                Error::ProviderUnavailable(e.to_string())
            }
        };
        let resp: ChatResponse = req
            .send()
            .await
            .and_then(|r| r.error_for_status())
            .map_err(map_err)?
            .json()
            .await
            .map_err(map_err)?;
        resp.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| Error::ProviderUnavailable("provider returned no content".into()))
    }
}
