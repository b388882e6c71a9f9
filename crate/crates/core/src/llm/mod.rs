//! Language-model boundary: a completion trait, the HTTP client and a
//! scripted stub used for tests and offline runs.

mod http;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpLanguageModel, LlmEndpointSpec};
pub use scripted::{ScriptRule, ScriptedModel, ScriptedModelFile};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("language model unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("language model rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("language model protocol error: {0}")]
    Protocol(String),
}

impl LlmError {
    /// The endpoint could not be reached or kept failing.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, LlmError::Transport { .. })
    }
}

/// A text-completion backend.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Arc<M> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

/// A model that is always down; handy for exercising fail-open paths.
#[derive(Debug, Clone, Default)]
pub struct UnreachableModel;

impl LanguageModel for UnreachableModel {
    fn complete(&self, _prompt: &str) -> Result<String, LlmError> {
        Err(LlmError::Transport {
            attempts: 1,
            message: "connection refused".into(),
        })
    }
}

/// How system instructions and user content are framed for a model family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptDialect {
    /// `[INST] <<SYS>> … <</SYS>> … [/INST]`
    #[default]
    Llama2Inst,
    /// Markdown-ish headings, for models without special tokens.
    Plain,
}

const LLAMA2_CONTROL: [&str; 4] = ["<<SYS>>", "<</SYS>>", "[INST]", "[/INST]"];

impl PromptDialect {
    pub fn wrap(self, system: &str, user: &str) -> String {
        match self {
            PromptDialect::Llama2Inst => {
                format!(
                    "<s>[INST] <<SYS>>\n{}\n<</SYS>>\n\n{} [/INST]",
                    system.trim(),
                    user.trim()
                )
            }
            PromptDialect::Plain => {
                format!(
                    "### Instructions\n{}\n\n{}\n\n### Response\n",
                    system.trim(),
                    user.trim()
                )
            }
        }
    }

    /// Removes the dialect's control tokens from untrusted text so user input
    /// cannot open a second system block.
    pub fn sanitize(self, text: &str) -> String {
        match self {
            PromptDialect::Llama2Inst => {
                let mut out = text.to_string();
                for token in LLAMA2_CONTROL {
                    out = out.replace(token, "");
                }
                out
            }
            PromptDialect::Plain => text.replace("### ", "## "),
        }
    }
}
