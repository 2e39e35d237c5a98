use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::KnowledgeError;
use crate::text::{fnv1a64, tokens};

pub const DEFAULT_DIMENSION: usize = 256;

/// Seed mixed into every feature hash of the default embedder.
pub const HASH_SEED: u64 = 0x5eed_0000_0000_002a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, KnowledgeError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KnowledgeError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { values, norm })
    }

    /// Scales to unit Euclidean norm.
    pub fn normalized(values: Vec<f64>) -> Result<Self, KnowledgeError> {
        let raw = Self::new(values)?;
        if raw.norm == 0.0 {
            return Err(KnowledgeError::NonFinite);
        }
        let values: Vec<f64> = raw.values.iter().map(|v| v / raw.norm).collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, KnowledgeError> {
    if a.dimension() != b.dimension() {
        return Err(KnowledgeError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}

/// Text to fixed-dimension unit vectors.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, KnowledgeError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, KnowledgeError> {
        let mut out = self.embed_batch(&[text.to_owned()])?;
        out.pop().ok_or(KnowledgeError::EmptyText)
    }
}

/// Feature-hashed term frequencies of lowercase word unigrams and
/// character trigrams (over `#word#`), L2-normalized.
#[derive(Clone, Debug)]
pub struct HashedNgramEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl HashedNgramEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension: dimension.max(1),
            seed: HASH_SEED,
        }
    }

    fn bucket(&self, feature: &str) -> usize {
        (fnv1a64(feature.as_bytes(), self.seed) % self.dimension as u64) as usize
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, KnowledgeError> {
        let words = tokens(text);
        if words.is_empty() {
            return Err(KnowledgeError::EmptyText);
        }
        let mut counts = vec![0.0f64; self.dimension];
        for word in words {
            let word = word.to_lowercase();
            counts[self.bucket(&format!("w:{word}"))] += 1.0;
            let padded: Vec<char> = format!("#{word}#").chars().collect();
            for tri in padded.windows(3) {
                let tri: String = tri.iter().collect();
                counts[self.bucket(&format!("c:{tri}"))] += 1.0;
            }
        }
        EmbeddingVector::normalized(counts)
    }
}

impl Embedder for HashedNgramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, KnowledgeError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

/// OpenAI-compatible `/embeddings` endpoint. Vectors are normalized on
/// ingest and must match the configured dimension.
#[derive(Clone, Debug)]
pub struct HttpEmbedder {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key: Option<String>,
    pub dimension: usize,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, KnowledgeError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(KnowledgeError::EmptyText);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| KnowledgeError::Gateway(e.to_string()))?;
        let url = format!("{}/embeddings", self.endpoint_url.trim_end_matches('/'));
        let mut request = client.post(url).json(&EmbeddingsRequest {
            model: &self.model_name,
            input: texts,
        });
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| KnowledgeError::Gateway(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(KnowledgeError::Gateway(format!("HTTP {}", status.as_u16())));
        }
        let mut body: EmbeddingsResponse = response.json().map_err(|e| KnowledgeError::Gateway(e.to_string()))?;
        if body.data.len() != texts.len() {
            return Err(KnowledgeError::Gateway(format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        body.data.sort_by_key(|d| d.index.unwrap_or(usize::MAX));
        body.data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.dimension {
                    return Err(KnowledgeError::DimensionMismatch {
                        expected: self.dimension,
                        found: d.embedding.len(),
                    });
                }
                EmbeddingVector::normalized(d.embedding)
            })
            .collect()
    }
}
