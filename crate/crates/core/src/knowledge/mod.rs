//! Static retrieval: a local store of term definitions and a global store of
//! chunked reference documents, both searched by cosine similarity over a
//! shared embedder.

mod embed;
mod store;

pub use embed::{cosine_similarity, Embedder, EmbeddingVector, HashedNgramEmbedder, HttpEmbedder, DEFAULT_DIMENSION};
pub use store::{
    chunk_document, load_corpus_dir, load_term_file, ChunkStore, DocumentChunk, KnowledgeBase, KnowledgeChunk,
    ScoredChunk, TermEntry, TermStore, DEFAULT_CHUNK_TOKENS, DEFAULT_GLOBAL_K,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("document {0:?} is empty after normalization")]
    EmptyDocument(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("store is empty")]
    EmptyStore,
    #[error("embedding has non-finite or zero-norm components")]
    NonFinite,
    #[error("chunk size must be at least one token")]
    InvalidChunkSize,
    #[error("retrieval depth k must be at least 1")]
    InvalidK,
    #[error("embedding endpoint error: {0}")]
    Gateway(String),
    #[error("corrupt store file {path}: {reason}")]
    CorruptStore { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl KnowledgeError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        KnowledgeError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
