use std::cmp::Ordering;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{cosine_similarity, Embedder, EmbeddingVector, KnowledgeError};
use crate::text::{normalize, tokens};

pub const DEFAULT_CHUNK_TOKENS: usize = 500;
pub const DEFAULT_GLOBAL_K: usize = 3;

const MATRIX_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub term: String,
    pub definition: String,
    #[serde(skip)]
    pub embedding: Option<EmbeddingVector>,
}

/// A chunk of a source document before embedding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub token_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    #[serde(flatten)]
    pub chunk: DocumentChunk,
    #[serde(skip)]
    pub embedding: Option<EmbeddingVector>,
}

impl KnowledgeChunk {
    pub fn doc_id(&self) -> &str {
        &self.chunk.doc_id
    }

    pub fn chunk_index(&self) -> usize {
        self.chunk.chunk_index
    }

    pub fn text(&self) -> &str {
        &self.chunk.text
    }
}

/// Splits normalized text into consecutive windows of `chunk_tokens`
/// whitespace tokens; only the last chunk may be shorter.
pub fn chunk_document(doc_id: &str, text: &str, chunk_tokens: usize) -> Result<Vec<DocumentChunk>, KnowledgeError> {
    if chunk_tokens == 0 {
        return Err(KnowledgeError::InvalidChunkSize);
    }
    let toks = tokens(text);
    if toks.is_empty() {
        return Err(KnowledgeError::EmptyDocument(doc_id.to_owned()));
    }
    Ok(toks
        .chunks(chunk_tokens)
        .enumerate()
        .map(|(chunk_index, window)| DocumentChunk {
            doc_id: doc_id.to_owned(),
            chunk_index,
            text: window.join(" "),
            token_count: window.len(),
        })
        .collect())
}

fn embedding_of<'a>(e: &'a Option<EmbeddingVector>) -> &'a EmbeddingVector {
    e.as_ref().expect("stored entries are always embedded")
}

/// Local store: term definitions, embedded by their definition text.
#[derive(Clone, Debug, PartialEq)]
pub struct TermStore {
    dimension: usize,
    entries: Vec<TermEntry>,
}

impl TermStore {
    pub fn build(embedder: &dyn Embedder, pairs: &[(String, String)]) -> Result<Self, KnowledgeError> {
        let definitions: Vec<String> = pairs.iter().map(|(_, d)| d.clone()).collect();
        let embeddings = if definitions.is_empty() {
            Vec::new()
        } else {
            embedder.embed_batch(&definitions)?
        };
        let entries = pairs
            .iter()
            .zip(embeddings)
            .map(|((term, definition), e)| TermEntry {
                term: term.clone(),
                definition: definition.clone(),
                embedding: Some(e),
            })
            .collect();
        Ok(Self {
            dimension: embedder.dimension(),
            entries,
        })
    }

    pub fn entries(&self) -> &[TermEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Entry with the highest similarity to `query`; the earliest inserted
    /// entry wins ties.
    pub fn retrieve_by_embedding(&self, query: &EmbeddingVector) -> Result<(&TermEntry, f64), KnowledgeError> {
        let mut best: Option<(&TermEntry, f64)> = None;
        for entry in &self.entries {
            let s = cosine_similarity(query, embedding_of(&entry.embedding))?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((entry, s));
            }
        }
        best.ok_or(KnowledgeError::EmptyStore)
    }

    pub fn retrieve_local(&self, embedder: &dyn Embedder, query: &str) -> Result<&TermEntry, KnowledgeError> {
        if self.entries.is_empty() {
            return Err(KnowledgeError::EmptyStore);
        }
        let q = embedder.embed(query)?;
        self.retrieve_by_embedding(&q).map(|(e, _)| e)
    }

    pub fn save(&self, dir: &Path, name: &str) -> Result<(), KnowledgeError> {
        let rows: Vec<String> = self
            .entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("term entry serializes"))
            .collect();
        let vectors: Vec<&EmbeddingVector> = self.entries.iter().map(|e| embedding_of(&e.embedding)).collect();
        write_store(dir, name, "terms", self.dimension, &rows, &vectors)
    }

    pub fn load(dir: &Path, name: &str) -> Result<Self, KnowledgeError> {
        let (dimension, rows, vectors) = read_store(dir, name, "terms")?;
        let entries = rows
            .iter()
            .zip(vectors)
            .map(|(row, v)| {
                let mut entry: TermEntry = serde_json::from_str(row).map_err(|e| KnowledgeError::CorruptStore {
                    path: manifest_path(dir, name).display().to_string(),
                    reason: e.to_string(),
                })?;
                entry.embedding = Some(v);
                Ok(entry)
            })
            .collect::<Result<_, KnowledgeError>>()?;
        Ok(Self { dimension, entries })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredChunk<'a> {
    pub chunk: &'a KnowledgeChunk,
    pub score: f64,
}

/// Global store: embedded document chunks.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkStore {
    dimension: usize,
    chunks: Vec<KnowledgeChunk>,
}

impl ChunkStore {
    /// Chunks and embeds `(doc_id, text)` documents in the given order.
    pub fn build(
        embedder: &dyn Embedder,
        documents: &[(String, String)],
        chunk_tokens: usize,
    ) -> Result<Self, KnowledgeError> {
        let mut pieces = Vec::new();
        for (doc_id, text) in documents {
            pieces.extend(chunk_document(doc_id, text, chunk_tokens)?);
        }
        Self::from_chunks(embedder, pieces)
    }

    pub fn from_chunks(embedder: &dyn Embedder, pieces: Vec<DocumentChunk>) -> Result<Self, KnowledgeError> {
        let texts: Vec<String> = pieces.iter().map(|c| c.text.clone()).collect();
        let embeddings = if texts.is_empty() {
            Vec::new()
        } else {
            embedder.embed_batch(&texts)?
        };
        let chunks = pieces
            .into_iter()
            .zip(embeddings)
            .map(|(chunk, e)| KnowledgeChunk {
                chunk,
                embedding: Some(e),
            })
            .collect();
        Ok(Self {
            dimension: embedder.dimension(),
            chunks,
        })
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The `k` most similar chunks, by descending similarity with ties on
    /// ascending `(doc_id, chunk_index)`.
    pub fn retrieve_by_embedding(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredChunk<'_>>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        if self.chunks.is_empty() {
            return Err(KnowledgeError::EmptyStore);
        }
        let mut scored = self
            .chunks
            .iter()
            .map(|c| {
                Ok(ScoredChunk {
                    chunk: c,
                    score: cosine_similarity(query, embedding_of(&c.embedding))?,
                })
            })
            .collect::<Result<Vec<_>, KnowledgeError>>()?;
        scored.sort_by(rank_order);
        scored.truncate(k);
        Ok(scored)
    }

    pub fn retrieve_global(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
    ) -> Result<Vec<ScoredChunk<'_>>, KnowledgeError> {
        if self.chunks.is_empty() {
            return Err(KnowledgeError::EmptyStore);
        }
        let q = embedder.embed(query)?;
        self.retrieve_by_embedding(&q, k)
    }

    pub fn save(&self, dir: &Path, name: &str) -> Result<(), KnowledgeError> {
        let rows: Vec<String> = self
            .chunks
            .iter()
            .map(|c| serde_json::to_string(c).expect("chunk serializes"))
            .collect();
        let vectors: Vec<&EmbeddingVector> = self.chunks.iter().map(|c| embedding_of(&c.embedding)).collect();
        write_store(dir, name, "chunks", self.dimension, &rows, &vectors)
    }

    pub fn load(dir: &Path, name: &str) -> Result<Self, KnowledgeError> {
        let (dimension, rows, vectors) = read_store(dir, name, "chunks")?;
        let chunks = rows
            .iter()
            .zip(vectors)
            .map(|(row, v)| {
                let mut chunk: KnowledgeChunk = serde_json::from_str(row).map_err(|e| KnowledgeError::CorruptStore {
                    path: manifest_path(dir, name).display().to_string(),
                    reason: e.to_string(),
                })?;
                chunk.embedding = Some(v);
                Ok(chunk)
            })
            .collect::<Result<_, KnowledgeError>>()?;
        Ok(Self { dimension, chunks })
    }
}

fn rank_order(a: &ScoredChunk<'_>, b: &ScoredChunk<'_>) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.chunk.doc_id().cmp(b.chunk.doc_id()))
        .then_with(|| a.chunk.chunk_index().cmp(&b.chunk.chunk_index()))
}

fn manifest_path(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(format!("{name}.manifest.jsonl"))
}

fn matrix_path(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(format!("{name}.f32"))
}

#[derive(Serialize, Deserialize)]
struct ManifestHeader {
    kind: String,
    dimension: usize,
    count: usize,
}

/// Manifest: a JSON header line then one JSON record per entry. Matrix:
/// `EMB1`, u32 dimension, u32 count, then `count * dimension` f32, all
/// little-endian.
fn write_store(
    dir: &Path,
    name: &str,
    kind: &str,
    dimension: usize,
    rows: &[String],
    vectors: &[&EmbeddingVector],
) -> Result<(), KnowledgeError> {
    fs::create_dir_all(dir).map_err(|e| KnowledgeError::io(dir, e))?;
    let header = ManifestHeader {
        kind: kind.to_owned(),
        dimension,
        count: rows.len(),
    };
    let mut manifest = serde_json::to_string(&header).expect("header serializes");
    manifest.push('\n');
    for row in rows {
        manifest.push_str(row);
        manifest.push('\n');
    }
    let mpath = manifest_path(dir, name);
    fs::write(&mpath, manifest).map_err(|e| KnowledgeError::io(&mpath, e))?;

    let mut matrix = Vec::with_capacity(12 + vectors.len() * dimension * 4);
    matrix.extend_from_slice(MATRIX_MAGIC);
    matrix.extend_from_slice(&(dimension as u32).to_le_bytes());
    matrix.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
    for v in vectors {
        for &x in v.values() {
            matrix.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let xpath = matrix_path(dir, name);
    let mut file = fs::File::create(&xpath).map_err(|e| KnowledgeError::io(&xpath, e))?;
    file.write_all(&matrix).map_err(|e| KnowledgeError::io(&xpath, e))?;
    Ok(())
}

/// Reloaded vectors are widened to f64 and renormalized to unit length.
fn read_store(dir: &Path, name: &str, kind: &str) -> Result<(usize, Vec<String>, Vec<EmbeddingVector>), KnowledgeError> {
    let mpath = manifest_path(dir, name);
    let corrupt = |path: &Path, reason: String| KnowledgeError::CorruptStore {
        path: path.display().to_string(),
        reason,
    };
    let manifest = fs::read_to_string(&mpath).map_err(|e| KnowledgeError::io(&mpath, e))?;
    let mut lines = manifest.lines();
    let header: ManifestHeader = serde_json::from_str(lines.next().unwrap_or_default())
        .map_err(|e| corrupt(&mpath, format!("header: {e}")))?;
    if header.kind != kind {
        return Err(corrupt(&mpath, format!("expected {kind} store, found {}", header.kind)));
    }
    let rows: Vec<String> = lines.map(str::to_owned).collect();
    if rows.len() != header.count {
        return Err(corrupt(&mpath, format!("header says {} rows, found {}", header.count, rows.len())));
    }

    let xpath = matrix_path(dir, name);
    let bytes = fs::read(&xpath).map_err(|e| KnowledgeError::io(&xpath, e))?;
    if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
        return Err(corrupt(&xpath, "bad magic".into()));
    }
    let dimension = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if dimension != header.dimension || count != header.count {
        return Err(corrupt(&xpath, "matrix header disagrees with manifest".into()));
    }
    if bytes.len() != 12 + dimension * count * 4 {
        return Err(corrupt(&xpath, "truncated matrix".into()));
    }
    let vectors = bytes[12..]
        .chunks_exact(dimension.max(1) * 4)
        .take(count)
        .map(|row| {
            let values = row
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
                .collect();
            EmbeddingVector::normalized(values)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((dimension, rows, vectors))
}

/// Both static stores sharing one embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeBase {
    pub terms: TermStore,
    pub chunks: ChunkStore,
}

impl KnowledgeBase {
    pub fn save(&self, dir: &Path) -> Result<(), KnowledgeError> {
        self.terms.save(dir, "terms")?;
        self.chunks.save(dir, "chunks")
    }

    pub fn load(dir: &Path) -> Result<Self, KnowledgeError> {
        Ok(Self {
            terms: TermStore::load(dir, "terms")?,
            chunks: ChunkStore::load(dir, "chunks")?,
        })
    }

    /// Static knowledge text for a query: the best term definition and the
    /// top-`k` chunks. Empty stores contribute nothing.
    pub fn knowledge_text(&self, embedder: &dyn Embedder, query: &str, k: usize) -> Result<String, KnowledgeError> {
        let q = embedder.embed(query)?;
        let mut out = String::new();
        if !self.terms.is_empty() {
            let (term, _) = self.terms.retrieve_by_embedding(&q)?;
            out.push_str(&format!("TERM {}: {}\n", term.term, term.definition));
        }
        if !self.chunks.is_empty() {
            for hit in self.chunks.retrieve_by_embedding(&q, k)? {
                out.push_str(&format!(
                    "REFERENCE {}#{}: {}\n",
                    hit.chunk.doc_id(),
                    hit.chunk.chunk_index(),
                    hit.chunk.text()
                ));
            }
        }
        Ok(out)
    }
}

/// Reads every regular file of `dir` (sorted by name) as one document whose
/// id is the file name.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<(String, String)>, KnowledgeError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| KnowledgeError::io(dir, e))? {
        let entry = entry.map_err(|e| KnowledgeError::io(dir, e))?;
        if entry.file_type().map_err(|e| KnowledgeError::io(dir, e))?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let path = dir.join(&name);
            let text = fs::read_to_string(&path).map_err(|e| KnowledgeError::io(&path, e))?;
            Ok((name, normalize(&text)))
        })
        .filter(|r| !matches!(r, Ok((_, t)) if t.is_empty()))
        .collect()
}

/// Parses `term<TAB>definition` lines; blank lines and `#` comments are skipped.
pub fn load_term_file(path: &Path) -> Result<Vec<(String, String)>, KnowledgeError> {
    let text = fs::read_to_string(path).map_err(|e| KnowledgeError::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (term, definition) = line.split_once('\t').ok_or_else(|| KnowledgeError::CorruptStore {
            path: path.display().to_string(),
            reason: format!("line {}: expected term<TAB>definition", i + 1),
        })?;
        pairs.push((term.trim().to_owned(), definition.trim().to_owned()));
    }
    Ok(pairs)
}
