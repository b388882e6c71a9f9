use std::fmt;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize::terms;
use super::vector::EmbeddingVector;
use crate::net::{with_retries, Attempt, RetryPolicy};
use crate::Scalar;

/// Identifies an embedding function; stored in the manifest so queries are
/// never embedded with a different function than the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbedderSpec(pub String);

impl fmt::Display for EmbedderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding transport error: {0}")]
    Transport(String),
    #[error("embedding protocol error: {0}")]
    Protocol(String),
    #[error("embedder returned {got} dimensions, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

pub trait Embedder<T: Scalar>: Send + Sync {
    fn spec(&self) -> EmbedderSpec;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError>;
}

impl<T: Scalar, E: Embedder<T> + ?Sized> Embedder<T> for &E {
    fn spec(&self) -> EmbedderSpec {
        (**self).spec()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        (**self).embed(text)
    }
}

impl<T: Scalar, E: Embedder<T> + ?Sized> Embedder<T> for std::sync::Arc<E> {
    fn spec(&self) -> EmbedderSpec {
        (**self).spec()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        (**self).embed(text)
    }
}

/// 64-bit FNV-1a; stable across processes and platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Deterministic bag-of-tokens embedder: each lowercased token is hashed
/// into one of `dimension` buckets, bucket counts are L2-normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dimension: 64 }
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn bucket(&self, term: &str) -> usize {
        (fnv1a(term.as_bytes()) % self.dimension as u64) as usize
    }
}

impl<T: Scalar> Embedder<T> for HashingEmbedder {
    fn spec(&self) -> EmbedderSpec {
        EmbedderSpec(format!("hashing-fnv1a/{}", self.dimension))
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        let mut counts = vec![T::zero(); self.dimension];
        for term in terms(text) {
            let b = self.bucket(&term);
            counts[b] = counts[b] + T::one();
        }
        let v = EmbeddingVector::new(counts).map_err(|e| EmbedError::Protocol(e.to_string()))?;
        Ok(v.normalized())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpEmbedderConfig {
    pub base_url: String,
    pub model: String,
    pub dimension: usize,
    #[serde(default)]
    pub auth_token: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    30
}

/// Remote embedding endpoint: `POST {base_url}/embeddings` with
/// `{"model", "input"}`, answered by `{"embedding": [...]}`.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    client: Client,
    retry: RetryPolicy,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig, retry: RetryPolicy) -> Result<Self, EmbedError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(Self {
            config,
            client,
            retry,
        })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl<T: Scalar> Embedder<T> for HttpEmbedder {
    fn spec(&self) -> EmbedderSpec {
        EmbedderSpec(format!(
            "http:{}/{}",
            self.config.model, self.config.dimension
        ))
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let body = EmbedRequest {
            model: &self.config.model,
            input: text,
        };
        let (result, _) = with_retries(&self.retry, |_| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(t) = &self.config.auth_token {
                req = req.bearer_auth(t);
            }
            match req.send() {
                Err(e) => Attempt::Retry(EmbedError::Transport(e.to_string())),
                Ok(r) if r.status().is_server_error() => {
                    Attempt::Retry(EmbedError::Transport(format!("HTTP {}", r.status())))
                }
                Ok(r) if !r.status().is_success() => {
                    Attempt::Fail(EmbedError::Protocol(format!("HTTP {}", r.status())))
                }
                Ok(r) => match r.json::<EmbedResponse>() {
                    Ok(b) => Attempt::Done(b.embedding),
                    Err(e) => Attempt::Fail(EmbedError::Protocol(e.to_string())),
                },
            }
        });
        let raw = result?;
        if raw.len() != self.config.dimension {
            return Err(EmbedError::Dimension {
                expected: self.config.dimension,
                got: raw.len(),
            });
        }
        EmbeddingVector::new(raw.into_iter().map(T::from_f64_lossy).collect())
            .map_err(|e| EmbedError::Protocol(e.to_string()))
    }
}
