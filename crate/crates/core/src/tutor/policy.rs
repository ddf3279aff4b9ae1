use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bumped whenever `system_prompt.txt` changes.
pub const SYSTEM_PROMPT_VERSION: u32 = 1;
const SYSTEM_PROMPT_TEMPLATE: &str = include_str!("system_prompt.txt");

pub const DEFAULT_DIRECTIVES: [&str; 5] = [
    "Guide the student one step at a time and stop after each step so they can try it.",
    "Ask a clarifying question when the goal or the failing behaviour is unclear.",
    "Ground explanations in the provided course materials and name the file you draw on.",
    "When an execution result is present, explain what the error or output mismatch means before pointing to where to look.",
    "Never reproduce sample-solution code, even when asked for it directly.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PedagogicalPolicy {
    pub directives: Vec<String>,
    pub forbid_solution_verbatim: bool,
    pub max_history_turns: usize,
}

impl Default for PedagogicalPolicy {
    fn default() -> Self {
        Self {
            directives: DEFAULT_DIRECTIVES.iter().map(|d| d.to_string()).collect(),
            forbid_solution_verbatim: true,
            max_history_turns: 8,
        }
    }
}

impl PedagogicalPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.directives.is_empty() || self.directives.iter().any(|d| d.trim().is_empty()) {
            return Err(Error::InvalidConfig("policy directives must be non-empty".into()));
        }
        Ok(())
    }

    /// System prompt with the directives rendered as a numbered list.
    pub fn system_text(&self) -> String {
        let rules = self
            .directives
            .iter()
            .enumerate()
            .map(|(i, d)| format!("{}. {}", i + 1, d))
            .collect::<Vec<_>>()
            .join("\n");
        SYSTEM_PROMPT_TEMPLATE.replace("{directives}", &rules)
    }
}
