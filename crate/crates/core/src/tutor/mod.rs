//! Grounded tutoring: prompt assembly under a pedagogical policy and the
//! LLM provider call.

pub mod policy;
pub mod prompt;
pub mod provider;

use std::sync::Arc;
use std::time::Duration;

pub use policy::{PedagogicalPolicy, SYSTEM_PROMPT_VERSION};
pub use prompt::{
    assemble_prompt, ContextSection, PromptBudget, PromptBundle, PromptInputs, SectionLabel, SectionPart,
};
pub use provider::{ExternalProvider, ExternalProviderConfig, LlmProvider, ScriptedProvider};

use crate::error::{Error, Result};

pub struct TutorEngine {
    provider: Arc<dyn LlmProvider>,
    policy: PedagogicalPolicy,
    budget: PromptBudget,
    deadline: Duration,
}

impl TutorEngine {
    pub fn new(
        provider: Arc<dyn LlmProvider>,
        policy: PedagogicalPolicy,
        budget: PromptBudget,
        deadline: Duration,
    ) -> Result<Self> {
        policy.validate()?;
        budget.validate(&policy)?;
        Ok(Self {
            provider,
            policy,
            budget,
            deadline,
        })
    }

    pub fn policy(&self) -> &PedagogicalPolicy {
        &self.policy
    }

    pub fn budget(&self) -> &PromptBudget {
        &self.budget
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// Calls the provider, failing with `PROVIDER_TIMEOUT` past the deadline.
    pub async fn respond(&self, bundle: &PromptBundle) -> Result<String> {
        match tokio::time::timeout(self.deadline, self.provider.complete(bundle)).await {
            Ok(Ok(reply)) if reply.trim().is_empty() => {
                Err(Error::ProviderUnavailable("provider returned an empty reply".into()))
            }
            Ok(result) => result,
            Err(_) => Err(Error::ProviderTimeout(self.deadline.as_millis() as u64)),
        }
    }
}
