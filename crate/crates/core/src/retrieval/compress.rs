use super::ScoredItem;
use crate::llm::{LanguageModel, PromptDialect};
use crate::Scalar;

/// Reply a model gives when nothing in the item bears on the query.
pub const NO_RELEVANT_CONTENT: &str = "NO_RELEVANT_CONTENT";

const INSTRUCTIONS: &str =
    "You extract evidence. From the context item below, copy only the sentences \
that help answer the query, word for word and in their original order, one per line. Do not add, \
rephrase or explain anything. If no sentence is relevant, reply exactly NO_RELEVANT_CONTENT.";

pub fn compression_prompt(text: &str, query: &str, dialect: PromptDialect) -> String {
    let user = format!(
        "--- Context item 1 ---\n{}\nQuery: {}",
        dialect.sanitize(text).trim(),
        dialect.sanitize(query).trim()
    );
    dialect.wrap(INSTRUCTIONS, &user)
}

/// Keeps the model's lines that occur verbatim in `original`; `None` when
/// nothing usable remains or the result would not be shorter.
fn verbatim_subset(original: &str, reply: &str) -> Option<String> {
    let reply = reply.trim();
    if reply.is_empty() || reply.contains(NO_RELEVANT_CONTENT) {
        return None;
    }
    let mut kept: Vec<&str> = reply
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && original.contains(l))
        .collect();
    kept.dedup();
    if kept.is_empty() {
        return None;
    }
    // Page chunks carry a title header; keep it so the item stays attributable.
    let header = original
        .lines()
        .next()
        .filter(|l| l.starts_with("Page Title:"));
    let mut out = String::new();
    if let Some(h) = header {
        if kept.first() != Some(&h) {
            out.push_str(h);
            out.push('\n');
        }
    }
    out.push_str(&kept.join("\n"));
    (out.len() < original.len()).then_some(out)
}

/// Replaces the item text with the query-relevant sentences the model picks.
/// Any failure or unusable reply leaves the item untouched.
pub fn compress_context<T: Scalar>(
    mut item: ScoredItem<T>,
    query: &str,
    llm: &dyn LanguageModel,
    dialect: PromptDialect,
) -> ScoredItem<T> {
    let prompt = compression_prompt(&item.item.text, query, dialect);
    match llm.complete(&prompt) {
        Ok(reply) => {
            if let Some(text) = verbatim_subset(&item.item.text, &reply) {
                item.item.text = text;
                item.compressed = true;
            }
        }
        Err(e) => tracing::warn!(item = %item.item.id, error = %e, "compression skipped"),
    }
    item
}
