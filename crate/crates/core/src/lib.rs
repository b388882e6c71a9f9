//! Retrieval-augmented question answering over exported chat threads and
//! wiki pages.
//!
//! The crate is organised along the path a question takes:
//!
//! * [`ingest`] parses chat exports and wiki pages, scrubs personal data and
//!   renders prefixed plain-text documents.
//! * [`corpus`] tokenizes and chunks documents into [`ContextItem`]s, embeds
//!   them and persists the vector store.
//! * [`retrieval`] scores items with TF-IDF, BM25, embeddings or an ensemble,
//!   applies top-k with a similarity threshold, compression and reordering.
//! * [`llm`] is the language-model boundary (HTTP client and scripted stub).
//! * [`dialogue`] runs query rewriting, prompt formation and answer
//!   generation for a chat session.
//! * [`eval`] reproduces the retriever comparison: Recall@k, answer
//!   similarity and response times averaged over iterations.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the
//! precision used by the service and CLI.

pub mod corpus;
pub mod dialogue;
pub mod eval;
pub mod ingest;
pub mod llm;
pub mod net;
pub mod retrieval;
mod scalar;

pub use corpus::{ContextItem, SourceKind};
pub use scalar::Scalar;

/// Vector store in double precision (the default everywhere).
pub type VectorStore = corpus::VectorStore<f64>;
/// Vector store in single precision.
pub type VectorStoreF32 = corpus::VectorStore<f32>;
pub type EmbeddingVector = corpus::EmbeddingVector<f64>;
pub type ScoredItem = retrieval::ScoredItem<f64>;
pub type RetrievalResult = retrieval::RetrievalResult<f64>;
pub type AnswerTrace = dialogue::AnswerTrace<f64>;
pub type Pipeline<'a> = dialogue::Pipeline<'a, f64>;
