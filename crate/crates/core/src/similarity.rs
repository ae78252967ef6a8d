//! Sentence similarity backends used to decide semantic constraint
//! satisfaction.
//!
//! The hashed n-gram embedding is defined bit-exactly so that scores are
//! reproducible everywhere: the token sequence is lowercased, joined with
//! single spaces and wrapped as `^…$`; every window of three Unicode scalar
//! values is hashed with 64-bit FNV-1a over its UTF-8 bytes, reduced modulo
//! the dimension (256) and counted; the count vector is L2-normalized.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("cannot embed an empty token sequence")]
    EmptyInput,
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no similarity entry for `{0}`")]
    MissingEntry(String),
    #[error("bad similarity table: {0}")]
    BadTable(String),
    #[error("embedding backend failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    HashedNgram,
    EncoderMean,
    InjectedTable,
}

/// Maps a token sequence to a fixed-dimension real vector.
pub trait SentenceEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn backend(&self) -> Backend;
    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>, SimilarityError>;
}

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bag of hashed character trigrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl HashedNgramEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedNgramEmbedder { dim }
    }
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl SentenceEmbedder for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn backend(&self) -> Backend {
        Backend::HashedNgram
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>, SimilarityError> {
        if tokens.is_empty() {
            return Err(SimilarityError::EmptyInput);
        }
        let text = format!("^{}$", tokens.join(" ").to_lowercase());
        let chars: Vec<char> = text.chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = [0u8; 16];
        for w in chars.windows(3) {
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            v[(fnv1a64(&buf[..n]) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// `dot(u, v) / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch(u.len(), v.len()));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Every suffix `[k, t)` of the decoded prefix no longer than `clen`.
///
/// Ordered from longest to shortest.
pub fn candidate_spans(t: usize, clen: usize) -> Vec<(usize, usize)> {
    if t == 0 || clen == 0 {
        return Vec::new();
    }
    (t.saturating_sub(clen)..t).map(|k| (k, t)).collect()
}

/// Source of the windowed similarity between a constraint and the decoded
/// prefix at the current step.
pub trait SimilaritySource: Send + Sync {
    /// Similarity of constraint `constraint_id` against `prefix`, the whole
    /// output decoded so far.
    fn similarity(
        &self,
        constraint_id: usize,
        constraint: &[String],
        prefix: &[String],
    ) -> Result<f64, SimilarityError>;
}

/// Maximum cosine over [`candidate_spans`] using a sentence embedder.
pub struct WindowedSimilarity<E> {
    embedder: E,
}

impl<E: SentenceEmbedder> WindowedSimilarity<E> {
    pub fn new(embedder: E) -> Self {
        WindowedSimilarity { embedder }
    }

    pub fn embedder(&self) -> &E {
        &self.embedder
    }
}

impl<E: SentenceEmbedder> SimilaritySource for WindowedSimilarity<E> {
    fn similarity(
        &self,
        _id: usize,
        constraint: &[String],
        prefix: &[String],
    ) -> Result<f64, SimilarityError> {
        if prefix.is_empty() {
            return Ok(0.0);
        }
        let target = self.embedder.embed(constraint)?;
        let mut best = f64::NEG_INFINITY;
        for (k, l) in candidate_spans(prefix.len(), constraint.len()) {
            let v = self.embedder.embed(&prefix[k..l])?;
            best = best.max(cosine(&v, &target)?);
        }
        Ok(best)
    }
}

/// Fixed similarity values keyed by `(constraint id, prefix length)`.
///
/// Lets a run replay a recorded similarity sequence exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InjectedTable {
    entries: HashMap<(usize, usize), f64>,
}

impl InjectedTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// One constraint's similarity at prefix lengths `0, 1, 2, …`.
    pub fn from_sequence(constraint_id: usize, values: &[f64]) -> Self {
        let mut t = Self::new();
        for (len, &v) in values.iter().enumerate() {
            t.insert(constraint_id, len, v);
        }
        t
    }

    pub fn insert(&mut self, constraint_id: usize, prefix_len: usize, value: f64) {
        self.entries.insert((constraint_id, prefix_len), value);
    }

    pub fn sim_lookup(
        &self,
        prefix_len: usize,
        constraint_id: usize,
    ) -> Result<f64, SimilarityError> {
        self.entries
            .get(&(constraint_id, prefix_len))
            .copied()
            .ok_or_else(|| SimilarityError::MissingEntry(format!("{constraint_id}:{prefix_len}")))
    }

    /// Parses the fixture format: a JSON object from `"constraint_id:prefix_len"` to a number.
    pub fn from_json(text: &str) -> Result<Self, SimilarityError> {
        let raw: HashMap<String, f64> =
            serde_json::from_str(text).map_err(|e| SimilarityError::BadTable(e.to_string()))?;
        let mut t = Self::new();
        for (key, value) in raw {
            let (id, len) = key
                .rsplit_once(':')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| SimilarityError::BadTable(format!("bad key `{key}`")))?;
            t.insert(id, len, value);
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, SimilarityError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimilarityError::BadTable(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut keys: Vec<_> = self.entries.keys().copied().collect();
        keys.sort_unstable();
        let map: serde_json::Map<String, serde_json::Value> = keys
            .into_iter()
            .map(|(id, len)| {
                (
                    format!("{id}:{len}"),
                    serde_json::json!(self.entries[&(id, len)]),
                )
            })
            .collect();
        serde_json::Value::Object(map).to_string()
    }
}

impl SimilaritySource for InjectedTable {
    fn similarity(
        &self,
        constraint_id: usize,
        _constraint: &[String],
        prefix: &[String],
    ) -> Result<f64, SimilarityError> {
        self.sim_lookup(prefix.len(), constraint_id)
    }
}

impl<T: SimilaritySource + ?Sized> SimilaritySource for &T {
    fn similarity(
        &self,
        id: usize,
        constraint: &[String],
        prefix: &[String],
    ) -> Result<f64, SimilarityError> {
        (**self).similarity(id, constraint, prefix)
    }
}

impl<T: SimilaritySource + ?Sized> SimilaritySource for Box<T> {
    fn similarity(
        &self,
        id: usize,
        constraint: &[String],
        prefix: &[String],
    ) -> Result<f64, SimilarityError> {
        (**self).similarity(id, constraint, prefix)
    }
}

impl<T: SimilaritySource + ?Sized> SimilaritySource for std::sync::Arc<T> {
    fn similarity(
        &self,
        id: usize,
        constraint: &[String],
        prefix: &[String],
    ) -> Result<f64, SimilarityError> {
        (**self).similarity(id, constraint, prefix)
    }
}
