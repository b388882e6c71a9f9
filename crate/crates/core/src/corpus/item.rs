use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Chat thread (message plus replies).
    Teams,
    /// Wiki page chunk.
    Confluence,
}

/// One retrievable unit of corpus text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    /// `source_id:chunk_index`
    pub id: String,
    pub text: String,
    pub source_kind: SourceKind,
    #[serde(default)]
    pub title: String,
    pub chunk_index: usize,
    pub chunk_count: usize,
    pub token_count: usize,
}

impl ContextItem {
    pub fn make_id(source_id: &str, chunk_index: usize) -> String {
        format!("{source_id}:{chunk_index}")
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.text.is_empty() {
            return Err(format!("item `{}` has empty text", self.id));
        }
        if self.chunk_count == 0 || self.chunk_index >= self.chunk_count {
            return Err(format!(
                "item `{}` has chunk {} of {}",
                self.id, self.chunk_index, self.chunk_count
            ));
        }
        if self.source_kind == SourceKind::Teams && self.chunk_count != 1 {
            return Err(format!(
                "thread item `{}` is split into {} chunks",
                self.id, self.chunk_count
            ));
        }
        Ok(())
    }
}
