use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, LlmError};

/// One scripted reply. The first rule whose `match` is a substring of the
/// prompt wins. A rule with `error` set simulates a transport failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(rename = "match")]
    pub pattern: String,
    #[serde(default)]
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedModelFile {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub default: String,
}

/// Deterministic stand-in for a completion endpoint.
///
/// Responses may contain placeholders filled from the prompt:
///
/// * `{{query}}`: text after the last `Question:` or `Query:` line
/// * `{{context:N}}`: full text of context item N (1-based)
/// * `{{context_first_line:N}}` / `{{context_last_line:N}}`
/// * `{{lines_containing:TEXT}}`: every context line containing TEXT
///   (case-insensitive), newline-separated
///
/// Context items are the blocks following `--- Context item N ---` lines.
#[derive(Debug, Default)]
pub struct ScriptedModel {
    script: ScriptedModelFile,
    calls: Mutex<Vec<String>>,
}

impl Clone for ScriptedModel {
    fn clone(&self) -> Self {
        Self::new(self.script.clone())
    }
}

impl ScriptedModel {
    pub fn new(script: ScriptedModelFile) -> Self {
        Self {
            script,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_rules<I, P, R>(rules: I, default: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = (P, R)>,
        P: Into<String>,
        R: Into<String>,
    {
        Self::new(ScriptedModelFile {
            rules: rules
                .into_iter()
                .map(|(p, r)| ScriptRule {
                    pattern: p.into(),
                    response: r.into(),
                    error: None,
                })
                .collect(),
            default: default.into(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let script =
            serde_json::from_slice(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Self::new(script))
    }

    /// Prompts received so far, in order.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl LanguageModel for ScriptedModel {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.calls
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(prompt.to_string());
        let rule = self
            .script
            .rules
            .iter()
            .find(|r| prompt.contains(&r.pattern));
        if let Some(ScriptRule {
            error: Some(message),
            ..
        }) = rule
        {
            return Err(LlmError::Transport {
                attempts: 1,
                message: message.clone(),
            });
        }
        let template = rule
            .map(|r| r.response.as_str())
            .unwrap_or(&self.script.default);
        Ok(fill_placeholders(template, prompt))
    }
}

fn fill_placeholders(template: &str, prompt: &str) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.push_str(&expand(&after[..end], prompt));
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn expand(directive: &str, prompt: &str) -> String {
    let (name, arg) = directive.split_once(':').unwrap_or((directive, ""));
    let index = || arg.trim().parse::<usize>().unwrap_or(1);
    let items = context_items(prompt);
    let item = |n: usize| items.get(n.wrapping_sub(1)).cloned().unwrap_or_default();
    match name.trim() {
        "query" => last_query(prompt),
        "context" => item(index()),
        "context_first_line" => item(index())
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("")
            .to_string(),
        "context_last_line" => item(index())
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("")
            .to_string(),
        "lines_containing" => {
            let needle = arg.to_lowercase();
            items
                .iter()
                .flat_map(|i| i.lines())
                .filter(|l| l.to_lowercase().contains(&needle))
                .collect::<Vec<_>>()
                .join("\n")
        }
        _ => format!("{{{{{directive}}}}}"),
    }
}

fn last_query(prompt: &str) -> String {
    prompt
        .lines()
        .rev()
        .find_map(|l| {
            let l = l.trim_start();
            l.strip_prefix("Question:")
                .or_else(|| l.strip_prefix("Query:"))
        })
        .map(|q| q.trim().trim_end_matches("[/INST]").trim().to_string())
        .unwrap_or_default()
}

fn context_items(prompt: &str) -> Vec<String> {
    let mut items: Vec<Vec<&str>> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in prompt.lines() {
        let t = line.trim();
        if t.starts_with("--- Context item") && t.ends_with("---") {
            if let Some(c) = current.take() {
                items.push(c);
            }
            current = Some(Vec::new());
        } else if t.starts_with("Question:")
            || t.starts_with("Query:")
            || t.starts_with("### Response")
        {
            if let Some(c) = current.take() {
                items.push(c);
            }
        } else if let Some(c) = current.as_mut() {
            c.push(line);
        }
    }
    if let Some(c) = current {
        items.push(c);
    }
    items
        .into_iter()
        .map(|lines| lines.join("\n").trim().to_string())
        .collect()
}
