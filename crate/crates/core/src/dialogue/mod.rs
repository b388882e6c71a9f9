//! The conversational loop: query rewriting, answer prompts, generation and
//! session history.

mod pipeline;
mod prompts;
mod session;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use pipeline::{
    generate_answer, rewrite_query, AnswerTrace, DialogueError, GenerationFailure, Pipeline,
    DEFAULT_FALLBACK_ANSWER, GENERATION_FAILED_NOTICE,
};
pub use prompts::{
    build_answer_prompt, build_rewrite_prompt, parse_rewrite_output, ANSWER_TEMPLATE,
    GROUNDING_GUARD, NO_DOCUMENTS, NO_HISTORY, REWRITE_MARKER, REWRITE_TEMPLATE,
};
pub use session::{ChatSession, ChatTurn, Role, DEFAULT_HISTORY_WINDOW};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    pub enhanced_query: String,
    pub was_rewritten: bool,
    pub raw_model_output: String,
    /// Set when the model call failed and the query was used as typed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Wall time of each pipeline step, serialised as milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTimings {
    #[serde(with = "ms")]
    pub rewrite: Duration,
    #[serde(with = "ms")]
    pub retrieve: Duration,
    #[serde(with = "ms")]
    pub prompt: Duration,
    #[serde(with = "ms")]
    pub generate: Duration,
}

impl StepTimings {
    pub fn total(&self) -> Duration {
        self.rewrite + self.retrieve + self.prompt + self.generate
    }

    pub fn as_array(&self) -> [(&'static str, Duration); 4] {
        [
            ("rewrite", self.rewrite),
            ("retrieve", self.retrieve),
            ("prompt", self.prompt),
            ("generate", self.generate),
        ]
    }
}

pub(crate) mod ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_nanos() as f64 / 1e6)
    }

    /// Rounds to whole nanoseconds, so values written by `serialize` read
    /// back exactly.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() || v < 0.0 {
            return Err(serde::de::Error::custom(format!("invalid duration {v} ms")));
        }
        Ok(Duration::from_nanos((v * 1e6).round() as u64))
    }
}
