use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VectorStore;

/// Manual correctness grade; recorded by people, never computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanGrade {
    Correct,
    PartiallyCorrectIncomplete,
    PartiallyCorrectExtraneous,
    PartiallyCorrectBoth,
    Incorrect,
}

/// Why a graded answer went wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCause {
    Hallucination,
    /// The supporting item was not retrieved.
    MissedContext,
    /// The supporting item was retrieved but the answer drew on another one.
    WrongContextFocus,
    GenericAnswer,
    RefusedToAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub id: String,
    pub question: String,
    pub reference_answer: String,
    pub supporting_item_ids: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_grade: Option<HumanGrade>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<ErrorCause>,
}

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate entry id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("supporting items missing from the store: {}", .0.join(", "))]
    Unresolved(Vec<String>),
}

/// One JSON object per non-blank line.
pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthEntry>, GroundTruthError> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let entry: GroundTruthEntry =
            serde_json::from_str(raw).map_err(|e| GroundTruthError::Malformed {
                line,
                message: e.to_string(),
            })?;
        let bad = |message: &str| GroundTruthError::Malformed {
            line,
            message: message.to_string(),
        };
        if entry.id.trim().is_empty() {
            return Err(bad("empty id"));
        }
        if entry.question.trim().is_empty() {
            return Err(bad("empty question"));
        }
        if entry.supporting_item_ids.is_empty() {
            return Err(bad("supporting_item_ids is empty"));
        }
        if !seen.insert(entry.id.clone()) {
            return Err(GroundTruthError::DuplicateId { line, id: entry.id });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthEntry>, GroundTruthError> {
    let text = std::fs::read_to_string(path).map_err(|source| GroundTruthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ground_truth(&text)
}

/// Every supporting id must name an item in `store`.
pub fn validate_against_store<T>(
    entries: &[GroundTruthEntry],
    store: &VectorStore<T>,
) -> Result<(), GroundTruthError>
where
    T: crate::Scalar,
{
    let missing: BTreeSet<String> = entries
        .iter()
        .flat_map(|e| e.supporting_item_ids.iter())
        .filter(|id| !store.contains(id))
        .cloned()
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(GroundTruthError::Unresolved(missing.into_iter().collect()))
    }
}
