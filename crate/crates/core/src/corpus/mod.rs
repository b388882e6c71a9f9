//! Chunking, embedding and the persisted vector store.

mod chunk;
mod embed;
mod item;
mod store;
mod tokenize;
mod vector;

pub use chunk::{
    chunk_header, plan_windows, split_confluence, split_teams, ChunkingConfig, ChunkingConfigError,
};
pub use embed::{
    EmbedError, Embedder, EmbedderSpec, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig,
};
pub use item::{ContextItem, SourceKind};
pub use store::{
    GenerationRoot, LoadedStore, StoreError, StoreHandle, StoreManifest, StoredRecord, VectorStore,
    ITEMS_FILE, MANIFEST_FILE,
};
pub use tokenize::{count_tokens, terms, tokens, Tokenizer, WordSymbolTokenizer};
pub use vector::{cosine, EmbeddingVector, VectorError};

use crate::ingest::{RenderedDocument, PAGE_TITLE_PREFIX};

/// Turns rendered documents into context items: threads whole, pages split
/// into titled windows.
///
/// For pages the leading `Page Title:` line is dropped before windowing,
/// since every chunk header repeats the title with its part number.
pub fn documents_to_items(docs: &[RenderedDocument], cfg: &ChunkingConfig) -> Vec<ContextItem> {
    docs.iter()
        .flat_map(|doc| match doc.kind {
            SourceKind::Teams => split_teams(&doc.text, &doc.source_id),
            SourceKind::Confluence => {
                let content = match doc.text.split_once('\n') {
                    Some((first, rest)) if first.starts_with(PAGE_TITLE_PREFIX) => rest,
                    _ => doc.text.as_str(),
                };
                split_confluence(content, &doc.title, &doc.source_id, cfg)
            }
        })
        .collect()
}
