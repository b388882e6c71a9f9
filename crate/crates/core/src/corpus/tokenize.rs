use std::ops::Range;

/// Splits text into tokens, reported as byte ranges into the input.
pub trait Tokenizer: Send + Sync {
    fn spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.spans(text).len()
    }
}

/// Default tokenizer: each maximal run of alphanumeric characters is one
/// token, every other non-whitespace character is a token on its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordSymbolTokenizer;

impl Tokenizer for WordSymbolTokenizer {
    fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if c.is_alphanumeric() {
                word_start.get_or_insert(i);
                continue;
            }
            if let Some(s) = word_start.take() {
                spans.push(s..i);
            }
            if !c.is_whitespace() {
                spans.push(i..i + c.len_utf8());
            }
        }
        if let Some(s) = word_start {
            spans.push(s..text.len());
        }
        spans
    }
}

pub fn count_tokens(text: &str) -> usize {
    WordSymbolTokenizer.count(text)
}

pub fn tokens(text: &str) -> Vec<&str> {
    WordSymbolTokenizer
        .spans(text)
        .into_iter()
        .map(|r| &text[r])
        .collect()
}

/// Lowercased tokens, the term form used by the lexical retrievers and the
/// hashing embedder.
pub fn terms(text: &str) -> Vec<String> {
    WordSymbolTokenizer
        .spans(text)
        .into_iter()
        .map(|r| text[r].to_lowercase())
        .collect()
}
