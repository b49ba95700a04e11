//! Text embeddings behind a small provider abstraction, plus cosine scoring.
//!
//! Two backends exist:
//!
//! * [`EmbeddingProvider::feature_hash`] hashes word unigrams and bigrams
//!   into signed buckets. Fully deterministic and self-contained.
//! * [`EmbeddingProvider::from_sidecar`] looks vectors up in a table
//!   exported offline by a real sentence-embedding model. The sidecar is one
//!   record per line: `text<TAB>v1,v2,...,vd`.
//!
//! Vectors are always unit length. Callers normalize text (see
//! [`crate::textkit::normalize`]) before embedding.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::textkit::{normalize, tokenize_words};

pub const DEFAULT_DIM: usize = 384;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("no embedding for {0:?} in the sidecar table")]
    LookupMiss(String),
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("sidecar line {line}: {reason}")]
    Sidecar { line: usize, reason: String },
    #[error("reading sidecar {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Unit-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Scales `values` to unit length. A zero vector maps to the first basis
    /// direction.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            values.iter_mut().for_each(|v| *v /= norm);
        } else if !values.is_empty() {
            values.iter_mut().for_each(|v| *v = 0.0);
            values[0] = 1.0;
        }
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    FeatureHash,
    FileLookup,
}

#[derive(Debug, Clone)]
enum Inner {
    FeatureHash,
    Table(HashMap<String, EmbeddingVector>),
}

#[derive(Debug, Clone)]
pub struct EmbeddingProvider {
    dim: usize,
    inner: Inner,
}

// 64-bit FNV-1a. Stable across platforms and releases, unlike std's hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider {
    pub fn feature_hash(dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        Ok(Self {
            dim,
            inner: Inner::FeatureHash,
        })
    }

    pub fn from_table(dim: usize, table: HashMap<String, EmbeddingVector>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        if let Some(v) = table.values().find(|v| v.dim() != dim) {
            return Err(EmbedError::DimMismatch { left: dim, right: v.dim() });
        }
        Ok(Self {
            dim,
            inner: Inner::Table(table),
        })
    }

    /// Loads a sidecar table. The dimension is taken from the first record and
    /// every later record must agree.
    pub fn read_sidecar<R: BufRead>(reader: R) -> Result<Self, EmbedError> {
        let mut table = HashMap::new();
        let mut dim = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| EmbedError::Sidecar { line: line_no, reason: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let (key, vec) = line.rsplit_once('\t').ok_or_else(|| EmbedError::Sidecar {
                line: line_no,
                reason: "missing tab separator".into(),
            })?;
            let values: Vec<f64> = vec
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| EmbedError::Sidecar { line: line_no, reason: e.to_string() })?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::Sidecar { line: line_no, reason: "non-finite component".into() });
            }
            if values.iter().all(|v| *v == 0.0) {
                return Err(EmbedError::Sidecar { line: line_no, reason: "zero vector".into() });
            }
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected {
                return Err(EmbedError::Sidecar {
                    line: line_no,
                    reason: format!("dimension {} differs from {}", values.len(), expected),
                });
            }
            table.insert(key.to_owned(), EmbeddingVector::normalized(values));
        }
        let dim = dim.ok_or(EmbedError::Sidecar { line: 0, reason: "empty sidecar".into() })?;
        Self::from_table(dim, table)
    }

    pub fn from_sidecar(path: &Path) -> Result<Self, EmbedError> {
        let file = std::fs::File::open(path).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_sidecar(std::io::BufReader::new(file))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn backend(&self) -> Backend {
        match self.inner {
            Inner::FeatureHash => Backend::FeatureHash,
            Inner::Table(_) => Backend::FileLookup,
        }
    }

    /// Embeds `text`. Table lookups try the exact key first, then its
    /// normalized form.
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        match &self.inner {
            Inner::FeatureHash => Ok(self.hash_embed(text)),
            Inner::Table(table) => table
                .get(text)
                .or_else(|| table.get(normalize(text).as_str()))
                .cloned()
                .ok_or_else(|| EmbedError::LookupMiss(text.to_owned())),
        }
    }

    fn hash_embed(&self, text: &str) -> EmbeddingVector {
        let tokens = tokenize_words(&normalize(text));
        let mut values = vec![0.0; self.dim];
        let mut add = |feature: &str| {
            let h = fnv1a(feature.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            values[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        };
        for t in tokens.iter() {
            add(t);
        }
        for pair in tokens.tokens().windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        EmbeddingVector::normalized(values)
    }
}

/// Cosine similarity; 0 if either side has zero norm.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimMismatch { left: u.dim(), right: v.dim() });
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    let nu = u.0.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.0.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Maps cosine from `[-1, 1]` onto `[0, 1]`.
pub fn cosine_to_reward(cos: f64) -> f64 {
    ((cos + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// `(cos(f(pred), f(ref)) + 1) / 2` over normalized text.
pub fn similarity_reward(provider: &EmbeddingProvider, pred: &str, reference: &str) -> Result<f64, EmbedError> {
    let p = provider.embed(normalize(pred).as_str())?;
    let r = provider.embed(normalize(reference).as_str())?;
    Ok(cosine_to_reward(cosine(&p, &r)?))
}
