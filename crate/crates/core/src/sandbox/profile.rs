use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to compile and run one language. Commands are argv arrays; the
/// placeholders `{dir}` (job directory), `{main}` (entrypoint filename) and
/// `{stem}` (entrypoint without extension) are substituted per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub name: String,
    pub file_extension: String,
    #[serde(default)]
    pub compile_cmd: Vec<String>,
    pub run_cmd: Vec<String>,
    #[serde(default)]
    pub runtime_error_patterns: Vec<String>,
}

const SHELL_METACHARACTERS: &[char] = &[
    ';', '|', '&', '$', '`', '>', '<', '(', ')', '*', '?', '!', '~', '\\', '"', '\'', '\n', '#',
];

impl LanguageProfile {
    pub fn java() -> Self {
        Self {
            name: "java".into(),
            file_extension: "java".into(),
            compile_cmd: vec!["javac".into(), "-encoding".into(), "UTF-8".into(), "{main}".into()],
            run_cmd: vec!["java".into(), "-cp".into(), "{dir}".into(), "{stem}".into()],
            runtime_error_patterns: vec![
                r#"Exception in thread ""#.into(),
                r"java\.lang\.[A-Za-z.]*(Exception|Error)\b".into(),
            ],
        }
    }

    /// Interpreted shell script; needs no toolchain beyond `sh`.
    pub fn script() -> Self {
        Self {
            name: "script".into(),
            file_extension: "sh".into(),
            compile_cmd: vec![],
            run_cmd: vec!["sh".into(), "{main}".into()],
            runtime_error_patterns: vec![r#"Exception in thread ""#.into(), r"(?m)^Traceback ".into()],
        }
    }

    pub(crate) fn compile(&self) -> Result<Vec<Regex>> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("profile name is empty".into()));
        }
        if self.run_cmd.is_empty() {
            return Err(Error::InvalidConfig(format!("profile `{}` has no run_cmd", self.name)));
        }
        for token in self.compile_cmd.iter().chain(&self.run_cmd) {
            if token.contains(SHELL_METACHARACTERS) {
                return Err(Error::InvalidConfig(format!(
                    "profile `{}`: command token `{token}` contains a shell metacharacter",
                    self.name
                )));
            }
        }
        self.runtime_error_patterns
            .iter()
            .map(|p| {
                Regex::new(p)
                    .map_err(|e| Error::InvalidConfig(format!("profile `{}`: bad pattern `{p}`: {e}", self.name)))
            })
            .collect()
    }
}

pub(crate) fn expand(template: &[String], dir: &str, main: &str) -> Vec<String> {
    let stem = main.rsplit_once('.').map_or(main, |(s, _)| s);
    template
        .iter()
        .map(|t| t.replace("{dir}", dir).replace("{main}", main).replace("{stem}", stem))
        .collect()
}
