use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::item::{ContextItem, SourceKind};
use super::tokenize::{count_tokens, Tokenizer, WordSymbolTokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    /// Window length in tokens.
    pub chunk_size: usize,
    /// Tokens shared by adjacent windows.
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            chunk_size: 800,
            overlap: 200,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid chunking config: overlap {overlap} must be smaller than chunk size {chunk_size}")]
pub struct ChunkingConfigError {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl ChunkingConfig {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, ChunkingConfigError> {
        let cfg = Self {
            chunk_size,
            overlap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ChunkingConfigError> {
        if self.overlap >= self.chunk_size {
            return Err(ChunkingConfigError {
                chunk_size: self.chunk_size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

/// Token windows for a document of `total` tokens: `[i·stride, i·stride + size)`
/// clipped to the document, stopping at the first window that reaches the end.
pub fn plan_windows(total: usize, cfg: &ChunkingConfig) -> Vec<Range<usize>> {
    if total == 0 {
        return Vec::new();
    }
    let stride = cfg.stride();
    let mut windows = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + cfg.chunk_size).min(total);
        windows.push(start..end);
        if end == total {
            return windows;
        }
        start += stride;
    }
}

/// Header line prepended to every page chunk.
pub fn chunk_header(title: &str, index: usize, count: usize) -> String {
    format!("Page Title: {title} (part {} of {count})\n", index + 1)
}

/// Splits a page document into overlapping token windows, each prefixed with
/// the page title and its part number. The window text is the original slice
/// of `doc`, so whitespace inside a window is preserved.
///
/// Panics if `cfg` is invalid; validate configs at load time.
pub fn split_confluence(
    doc: &str,
    title: &str,
    source_id: &str,
    cfg: &ChunkingConfig,
) -> Vec<ContextItem> {
    cfg.validate().expect("chunking config validated on load");
    let spans = WordSymbolTokenizer.spans(doc);
    let windows = plan_windows(spans.len(), cfg);
    let count = windows.len();
    windows
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let bytes = spans[w.start].start..spans[w.end - 1].end;
            let text = format!("{}{}", chunk_header(title, i, count), &doc[bytes]);
            ContextItem {
                id: ContextItem::make_id(source_id, i),
                token_count: count_tokens(&text),
                text,
                source_kind: SourceKind::Confluence,
                title: title.to_string(),
                chunk_index: i,
                chunk_count: count,
            }
        })
        .collect()
}

/// A rendered thread is embedded whole, as a single item.
pub fn split_teams(doc: &str, source_id: &str) -> Vec<ContextItem> {
    if doc.trim().is_empty() {
        return Vec::new();
    }
    vec![ContextItem {
        id: ContextItem::make_id(source_id, 0),
        text: doc.to_string(),
        source_kind: SourceKind::Teams,
        title: String::new(),
        chunk_index: 0,
        chunk_count: 1,
        token_count: count_tokens(doc),
    }]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::tokens;
    use std::collections::HashSet;

    fn synthetic(n: usize) -> String {
        (0..n)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn defaults_and_validation() {
        assert_eq!(
            ChunkingConfig::default(),
            ChunkingConfig {
                chunk_size: 800,
                overlap: 200
            }
        );
        assert_eq!(ChunkingConfig::default().stride(), 600);
        assert!(ChunkingConfig::new(100, 100).is_err());
        assert!(ChunkingConfig::new(100, 0).is_ok());
    }

    #[test]
    fn stride_arithmetic_for_1800_tokens() {
        assert_eq!(
            plan_windows(1800, &ChunkingConfig::default()),
            [0..800, 600..1400, 1200..1800]
        );
    }

    #[test]
    fn short_document_is_one_chunk() {
        let items = split_confluence(&synthetic(500), "T", "p", &ChunkingConfig::default());
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].chunk_count, 1);
        assert!(items[0].text.ends_with(&synthetic(500)));
        assert!(items[0].text.starts_with("Page Title: T (part 1 of 1)\n"));
    }

    #[test]
    fn empty_document_gives_no_items() {
        assert!(split_confluence("", "T", "p", &ChunkingConfig::default()).is_empty());
        assert!(split_confluence("  \n", "T", "p", &ChunkingConfig::default()).is_empty());
    }

    #[test]
    fn chunk_text_is_header_plus_window_tokens() {
        let doc = synthetic(1800);
        let items = split_confluence(&doc, "Add test channel", "p7", &ChunkingConfig::default());
        assert_eq!(items.len(), 3);
        let all = tokens(&doc);
        for (i, (item, w)) in items
            .iter()
            .zip([0..800, 600..1400, 1200..1800])
            .enumerate()
        {
            assert_eq!(item.id, format!("p7:{i}"));
            let (header, body) = item.text.split_once('\n').unwrap();
            assert_eq!(
                header,
                format!("Page Title: Add test channel (part {} of 3)", i + 1)
            );
            assert_eq!(tokens(body), all[w]);
            item.validate().unwrap();
        }
    }

    // Adjacent windows share exactly `overlap` tokens, compared by span.
    #[test]
    fn adjacent_windows_share_overlap_tokens() {
        let cfg = ChunkingConfig::default();
        for total in [801, 1400, 1401, 2600, 5000] {
            let w = plan_windows(total, &cfg);
            for pair in w.windows(2) {
                let a: HashSet<usize> = pair[0].clone().collect();
                let b: HashSet<usize> = pair[1].clone().collect();
                assert_eq!(a.intersection(&b).count(), 200, "total {total}");
            }
        }
    }

    #[test]
    fn teams_thread_is_one_item() {
        let items = split_teams("Message: x", "m1");
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].chunk_count, 1);
        assert_eq!(items[0].id, "m1:0");
        assert!(split_teams("", "m2").is_empty());
        let ids: HashSet<String> = (0..10)
            .flat_map(|i| split_teams("Message: y", &format!("m{i}")))
            .map(|i| i.id)
            .collect();
        assert_eq!(ids.len(), 10);
    }
}
