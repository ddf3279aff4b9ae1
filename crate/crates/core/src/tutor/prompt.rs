//! Deterministic, budgeted prompt assembly.
//!
//! All sizes are counted in chars. Sections are filled in priority order
//! (user question, INSTRUCTIONS, RETRIEVED, CODE, EXECUTION, HISTORY), each
//! bounded by its own cap and by whatever remains of the overall budget, so
//! the total can never exceed `context_budget_chars`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{ExecutionResult, Material, MaterialKind, TutorSession};
use crate::error::{Error, Result};
use crate::retrieval::ScoredChunk;
use crate::tutor::policy::PedagogicalPolicy;

pub const SOLUTION_WITHHELD: &str = "[solution withheld by policy]";
pub const TRUNCATION_MARKER: &str = "\n[... truncated ...]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptBudget {
    pub context_budget_chars: usize,
    pub retrieval_budget_chars: usize,
    pub instructions_budget_chars: usize,
    pub code_budget_chars: usize,
    pub execution_budget_chars: usize,
    pub user_budget_chars: usize,
}

impl Default for PromptBudget {
    fn default() -> Self {
        Self {
            context_budget_chars: 16_000,
            retrieval_budget_chars: 6_000,
            instructions_budget_chars: 3_000,
            code_budget_chars: 3_000,
            execution_budget_chars: 1_500,
            user_budget_chars: 1_500,
        }
    }
}

impl PromptBudget {
    pub fn validate(&self, policy: &PedagogicalPolicy) -> Result<()> {
        let system = policy.system_text().chars().count();
        if system + self.user_budget_chars.min(64) > self.context_budget_chars {
            return Err(Error::InvalidConfig(format!(
                "context_budget_chars {} cannot hold the {system}-char system prompt and a question",
                self.context_budget_chars
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SectionLabel {
    Instructions,
    Retrieved,
    Code,
    Execution,
    History,
}

impl SectionLabel {
    pub const ORDER: [SectionLabel; 5] = [
        SectionLabel::Instructions,
        SectionLabel::Retrieved,
        SectionLabel::Code,
        SectionLabel::Execution,
        SectionLabel::History,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionLabel::Instructions => "INSTRUCTIONS",
            SectionLabel::Retrieved => "RETRIEVED",
            SectionLabel::Code => "CODE",
            SectionLabel::Execution => "EXECUTION",
            SectionLabel::History => "HISTORY",
        }
    }
}

/// One labelled piece of a section. Only `text` counts toward budgets;
/// `source` is a short provenance tag (filename, chunk, speaker).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionPart {
    pub source: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSection {
    pub label: SectionLabel,
    pub parts: Vec<SectionPart>,
}

impl ContextSection {
    pub fn chars(&self) -> usize {
        self.parts.iter().map(|p| p.text.chars().count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(|p| p.text.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    /// Always the five labels, in `SectionLabel::ORDER`.
    pub context_sections: Vec<ContextSection>,
    pub user_text: String,
    pub total_chars: usize,
}

impl PromptBundle {
    pub fn section(&self, label: SectionLabel) -> &ContextSection {
        self.context_sections
            .iter()
            .find(|s| s.label == label)
            .expect("bundle carries every section")
    }

    /// Flattened context for providers that take a single user message.
    pub fn render_context(&self) -> String {
        let mut out = String::new();
        for section in &self.context_sections {
            if section.is_empty() {
                continue;
            }
            let _ = writeln!(out, "## {}", section.label.as_str());
            for part in &section.parts {
                let _ = writeln!(out, "### {}\n{}\n", part.source, part.text);
            }
        }
        out
    }

    pub fn render_user_message(&self) -> String {
        format!("{}## QUESTION\n{}", self.render_context(), self.user_text)
    }
}

/// Everything `assemble_prompt` reads.
pub struct PromptInputs<'a> {
    pub session: &'a TutorSession,
    pub query: &'a str,
    /// INSTRUCTIONS-kind materials in upload order.
    pub instructions: &'a [Material],
    /// Retrieval hits in rank order.
    pub retrieved: &'a [ScoredChunk],
    pub policy: &'a PedagogicalPolicy,
    pub budget: &'a PromptBudget,
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn prefix(s: &str, chars: usize) -> &str {
    match s.char_indices().nth(chars) {
        Some((b, _)) => &s[..b],
        None => s,
    }
}

/// `text` if it fits in `limit` chars, else a prefix plus the truncation
/// marker, else nothing.
fn fit(text: &str, limit: usize) -> Option<String> {
    if char_len(text) <= limit {
        return Some(text.to_owned());
    }
    let marker = char_len(TRUNCATION_MARKER);
    (limit > marker).then(|| format!("{}{}", prefix(text, limit - marker), TRUNCATION_MARKER))
}

/// Packs parts in order; the first part that does not fit is truncated and
/// packing stops.
fn pack_truncating(items: impl IntoIterator<Item = SectionPart>, limit: usize) -> Vec<SectionPart> {
    let mut used = 0;
    let mut out = Vec::new();
    for item in items {
        let len = char_len(&item.text);
        if used + len <= limit {
            used += len;
            out.push(item);
            continue;
        }
        if let Some(text) = fit(&item.text, limit - used) {
            out.push(SectionPart {
                source: item.source,
                text,
            });
        }
        break;
    }
    out
}

pub fn render_execution(r: &ExecutionResult) -> String {
    let mut out = format!("status: {}\n", r.status);
    match r.exit_code {
        Some(code) => {
            let _ = writeln!(out, "exit_code: {code}");
        }
        None => out.push_str("exit_code: none\n"),
    }
    if r.truncated {
        out.push_str("output was truncated\n");
    }
    for (label, body) in [
        ("compile_stdout", &r.compile_stdout),
        ("compile_stderr", &r.compile_stderr),
        ("run_stdout", &r.run_stdout),
        ("run_stderr", &r.run_stderr),
    ] {
        if !body.is_empty() {
            let _ = write!(out, "{label}:\n{body}");
            if !body.ends_with('\n') {
                out.push('\n');
            }
        }
    }
    out
}

fn charge(remaining: &mut usize, parts: Vec<SectionPart>) -> Vec<SectionPart> {
    *remaining -= parts.iter().map(|p| char_len(&p.text)).sum::<usize>();
    parts
}

/// Builds the provider input for one student question.
pub fn assemble_prompt(inputs: &PromptInputs<'_>) -> Result<PromptBundle> {
    if inputs.query.trim().is_empty() {
        return Err(Error::EmptyQuery);
    }
    let budget = inputs.budget;
    let system_text = inputs.policy.system_text();
    let mut remaining = budget.context_budget_chars.saturating_sub(char_len(&system_text));

    let user_text = fit(inputs.query, budget.user_budget_chars.min(remaining)).unwrap_or_default();
    remaining -= char_len(&user_text);

    let limit = budget.instructions_budget_chars.min(remaining);
    let instructions = charge(
        &mut remaining,
        pack_truncating(
            inputs
                .instructions
                .iter()
                .filter(|m| m.kind == MaterialKind::Instructions)
                .map(|m| SectionPart {
                    source: m.filename.clone(),
                    text: m.content.clone(),
                }),
            limit,
        ),
    );

    // Whole chunks only, in rank order; stop at the first that does not fit.
    let limit = budget.retrieval_budget_chars.min(remaining);
    let mut used = 0;
    let mut retrieved_parts = Vec::new();
    for hit in inputs.retrieved {
        let withheld = hit.source.kind == MaterialKind::Solution && inputs.policy.forbid_solution_verbatim;
        let text = if withheld {
            format!("{SOLUTION_WITHHELD} {}", hit.source.filename)
        } else {
            hit.chunk.text.clone()
        };
        let len = char_len(&text);
        if used + len > limit {
            break;
        }
        used += len;
        retrieved_parts.push(SectionPart {
            source: format!(
                "{} #{} ({}, score {:.3})",
                hit.source.filename, hit.chunk.seq, hit.source.kind, hit.score
            ),
            text,
        });
    }
    let retrieved = charge(&mut remaining, retrieved_parts);

    let limit = budget.code_budget_chars.min(remaining);
    let code = charge(
        &mut remaining,
        pack_truncating(
            inputs.session.files.iter().map(|(name, src)| SectionPart {
                source: name.clone(),
                text: src.clone(),
            }),
            limit,
        ),
    );

    let limit = budget.execution_budget_chars.min(remaining);
    let execution = charge(
        &mut remaining,
        inputs
            .session
            .last_execution
            .as_ref()
            .and_then(|r| fit(&render_execution(r), limit))
            .map(|text| SectionPart {
                source: "last run".into(),
                text,
            })
            .into_iter()
            .collect(),
    );

    // Most recent turns that fit, oldest dropped first.
    let limit = remaining;
    let turns = &inputs.session.turns;
    let recent = &turns[turns.len().saturating_sub(inputs.policy.max_history_turns)..];
    let mut used = 0;
    let mut start = recent.len();
    while start > 0 {
        let len = char_len(&recent[start - 1].text);
        if used + len > limit {
            break;
        }
        used += len;
        start -= 1;
    }
    let history = charge(
        &mut remaining,
        recent[start..]
            .iter()
            .map(|t| SectionPart {
                source: format!("{} #{}", t.role.as_str(), t.index),
                text: t.text.clone(),
            })
            .collect(),
    );

    let context_sections = vec![
        ContextSection {
            label: SectionLabel::Instructions,
            parts: instructions,
        },
        ContextSection {
            label: SectionLabel::Retrieved,
            parts: retrieved,
        },
        ContextSection {
            label: SectionLabel::Code,
            parts: code,
        },
        ContextSection {
            label: SectionLabel::Execution,
            parts: execution,
        },
        ContextSection {
            label: SectionLabel::History,
            parts: history,
        },
    ];
    let total_chars = char_len(&system_text)
        + char_len(&user_text)
        + context_sections.iter().map(ContextSection::chars).sum::<usize>();
    debug_assert!(total_chars <= budget.context_budget_chars);
    Ok(PromptBundle {
        system_text,
        context_sections,
        user_text,
        total_chars,
    })
}
