use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::{build_answer_prompt, build_rewrite_prompt, parse_rewrite_output};
use super::session::{ChatSession, Role};
use super::{RewriteOutcome, StepTimings};
use crate::corpus::{Embedder, VectorStore};
use crate::llm::{LanguageModel, LlmError, PromptDialect};
use crate::retrieval::{retrieve, RetrievalConfig, RetrievalError, RetrievalResult, RetrieverKind};
use crate::Scalar;

pub const DEFAULT_FALLBACK_ANSWER: &str =
    "I'm sorry, I don't have enough information to answer that question.";

/// Shown in the session when generation fails.
pub const GENERATION_FAILED_NOTICE: &str =
    "The answer could not be generated because the language model is unavailable. Please try again.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DialogueError {
    #[error("query is empty")]
    EmptyQuery,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub message: String,
    /// The endpoint was unreachable, as opposed to rejecting the request.
    pub unavailable: bool,
}

impl From<&LlmError> for GenerationFailure {
    fn from(e: &LlmError) -> Self {
        Self {
            message: e.to_string(),
            unavailable: e.is_unavailable(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace<T> {
    pub trace_id: String,
    pub session_id: String,
    pub original_query: String,
    pub rewrite: RewriteOutcome,
    pub retrieval: RetrievalResult<T>,
    pub final_prompt: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<GenerationFailure>,
    pub step_timings: StepTimings,
    pub created_at: DateTime<Utc>,
}

/// Single completion, trimmed; a blank reply becomes `fallback`.
pub fn generate_answer(
    prompt: &str,
    llm: &dyn LanguageModel,
    fallback: &str,
) -> Result<String, LlmError> {
    let text = llm.complete(prompt)?;
    let text = text.trim();
    Ok(if text.is_empty() {
        fallback.to_string()
    } else {
        text.to_string()
    })
}

/// Rewrites `user_query` against the session history. Never fails: a model
/// error leaves the query as typed and is recorded in the outcome.
pub fn rewrite_query(
    session: &ChatSession,
    user_query: &str,
    llm: &dyn LanguageModel,
    dialect: PromptDialect,
) -> RewriteOutcome {
    let prompt = build_rewrite_prompt(user_query, session.history(), dialect);
    match llm.complete(&prompt) {
        Ok(out) => parse_rewrite_output(&out, user_query),
        Err(e) => {
            tracing::warn!(session = %session.id, error = %e, "query rewriting skipped");
            RewriteOutcome {
                enhanced_query: user_query.to_string(),
                was_rewritten: false,
                raw_model_output: String::new(),
                error: Some(e.to_string()),
            }
        }
    }
}

/// Everything a turn needs besides the session.
pub struct Pipeline<'a, T: Scalar> {
    pub store: &'a VectorStore<T>,
    pub embedder: &'a dyn Embedder<T>,
    pub rewriter: &'a dyn LanguageModel,
    /// Also used for compression.
    pub generator: &'a dyn LanguageModel,
    pub retrieval: RetrievalConfig,
    pub dialect: PromptDialect,
    pub fallback_answer: String,
}

impl<'a, T: Scalar> Pipeline<'a, T> {
    /// One model for both rewriting and answering, default settings.
    pub fn new(
        store: &'a VectorStore<T>,
        embedder: &'a dyn Embedder<T>,
        llm: &'a dyn LanguageModel,
    ) -> Self {
        Self {
            store,
            embedder,
            rewriter: llm,
            generator: llm,
            retrieval: RetrievalConfig::default(),
            dialect: PromptDialect::default(),
            fallback_answer: DEFAULT_FALLBACK_ANSWER.to_string(),
        }
    }

    pub fn with_retrieval(mut self, cfg: RetrievalConfig) -> Self {
        self.retrieval = cfg;
        self
    }

    pub fn with_rewriter(mut self, llm: &'a dyn LanguageModel) -> Self {
        self.rewriter = llm;
        self
    }

    pub fn with_dialect(mut self, dialect: PromptDialect) -> Self {
        self.dialect = dialect;
        self
    }

    /// Rewrite, retrieve, prompt, generate. The user turn and a reply (the
    /// answer or a failure notice) are appended to the session unless
    /// retrieval is misconfigured.
    pub fn chat_turn(
        &self,
        session: &mut ChatSession,
        user_query: &str,
        kind: RetrieverKind,
    ) -> Result<AnswerTrace<T>, DialogueError> {
        let user_query = user_query.trim();
        if user_query.is_empty() {
            return Err(DialogueError::EmptyQuery);
        }
        let trace_id = format!("{}.{}", session.id, session.exchange_count() + 1);

        let t = Instant::now();
        let rewrite = rewrite_query(session, user_query, self.rewriter, self.dialect);
        let rewrite_time = elapsed(t);

        let t = Instant::now();
        let retrieval = retrieve(
            &rewrite.enhanced_query,
            kind,
            self.store,
            &self.retrieval,
            self.embedder,
            self.generator,
            self.dialect,
        )?;
        let retrieve_time = elapsed(t);

        let t = Instant::now();
        let final_prompt =
            build_answer_prompt(&rewrite.enhanced_query, &retrieval.selected, self.dialect);
        let prompt_time = elapsed(t);

        let t = Instant::now();
        let generated = generate_answer(&final_prompt, self.generator, &self.fallback_answer);
        let generate_time = elapsed(t);

        let (answer, error) = match generated {
            Ok(a) => (a, None),
            Err(e) => {
                tracing::error!(trace = %trace_id, error = %e, "answer generation failed");
                (
                    GENERATION_FAILED_NOTICE.to_string(),
                    Some(GenerationFailure::from(&e)),
                )
            }
        };
        let now = Utc::now();
        session.push(Role::User, user_query, "", now);
        session.push(Role::Assistant, answer.clone(), trace_id.clone(), now);

        Ok(AnswerTrace {
            trace_id,
            session_id: session.id.clone(),
            original_query: user_query.to_string(),
            rewrite,
            retrieval,
            final_prompt,
            answer,
            error,
            step_timings: StepTimings {
                rewrite: rewrite_time,
                retrieve: retrieve_time,
                prompt: prompt_time,
                generate: generate_time,
            },
            created_at: now,
        })
    }
}

/// Never zero, so a recorded step is always visible as having run.
fn elapsed(since: Instant) -> Duration {
    since.elapsed().max(Duration::from_nanos(1))
}
