//! Text embedding behind a provider abstraction, plus similarity math.
//!
//! Two providers ship: a deterministic offline hashing embedder for tests
//! and local runs, and a remote JSON-over-HTTP embedder for real runs.
//! Providers must return unit-norm vectors.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
}

/// A fixed-length embedding; provider outputs are L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|v| f64::from(*v) * f64::from(*v))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales to unit length. Errors on the zero vector.
    pub fn normalized(mut self) -> Result<Self, EmbedError> {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        for v in &mut self.0 {
            *v = (f64::from(*v) / norm) as f32;
        }
        Ok(self)
    }
}

/// Cosine similarity, accumulated in f64 and clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (x, y) in a.0.iter().zip(&b.0) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(-1.0, 1.0))
}

/// Embedding source. Implementations must be deterministic per instance
/// (same text, same vector) and safe for concurrent calls.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

/// Embeds a single text. Errors on text that is empty after trimming.
pub fn embed(provider: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut vectors = provider.embed_batch(&[text])?;
    Ok(vectors.remove(0))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Deterministic offline embedder: lowercase, split on non-alphanumerics,
/// FNV-1a each token into one of 256 buckets, accumulate counts,
/// L2-normalize. Identical output across processes and platforms.
#[derive(Debug, Default, Clone)]
pub struct HashEmbedder;

pub const HASH_EMBEDDER_DIM: usize = 256;

impl HashEmbedder {
    pub fn new() -> Self {
        Self
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let lowered = text.to_lowercase();
        let mut counts = [0.0f32; HASH_EMBEDDER_DIM];
        let mut any = false;
        for token in lowered.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            any = true;
            let bucket = (fnv1a64(token.as_bytes()) % HASH_EMBEDDER_DIM as u64) as usize;
            counts[bucket] += 1.0;
        }
        if !any {
            // No alphanumeric content to index.
            return Err(EmbedError::EmptyText);
        }
        EmbeddingVector(counts.to_vec()).normalized()
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        "hash-256"
    }

    fn dim(&self) -> usize {
        HASH_EMBEDDER_DIM
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

/// Remote embeddings endpoint settings.
///
/// Wire protocol: POST `{"model": <name>, "input": [<strings>]}`; the
/// response body is a JSON array of float arrays in input order. The auth
/// token is read from the environment variable named by `auth_env`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    #[serde(default = "default_retries")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
}

fn default_auth_env() -> String {
    "LEGOMEM_API_KEY".into()
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        Self {
            config,
            client: reqwest::blocking::Client::new(),
        }
    }

    fn call_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, String> {
        let body = serde_json::to_string(&EmbedRequest {
            model: &self.config.model,
            input: texts,
        })
        .map_err(|e| e.to_string())?;
        let mut request = self
            .client
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .body(body);
        if let Ok(token) = std::env::var(&self.config.auth_env) {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let response = request.send().map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("endpoint returned status {}", response.status()));
        }
        let text = response.text().map_err(|e| e.to_string())?;
        let raw: Vec<Vec<f32>> = serde_json::from_str(&text)
            .map_err(|e| format!("response is not an array of float arrays: {e}"))?;
        if raw.len() != texts.len() {
            return Err(format!(
                "expected {} vectors, got {}",
                texts.len(),
                raw.len()
            ));
        }
        raw.into_iter()
            .map(|values| {
                if values.len() != self.config.dim {
                    return Err(format!(
                        "expected dim {}, got {}",
                        self.config.dim,
                        values.len()
                    ));
                }
                EmbeddingVector(values)
                    .normalized()
                    .map_err(|e| e.to_string())
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        for text in texts {
            if text.trim().is_empty() {
                return Err(EmbedError::EmptyText);
            }
        }
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last_error = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.call_once(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(e) => last_error = e,
            }
        }
        Err(EmbedError::ProviderUnavailable(last_error))
    }
}

/// Caching wrapper: at most one inner call per distinct text. The cache is
/// internally synchronized; misses are resolved while holding the lock so
/// a text is never embedded twice.
pub struct CachedProvider<P> {
    inner: P,
    cache: Mutex<HashMap<String, EmbeddingVector>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut cache = self.cache.lock().expect("cache poisoned");
        let misses: Vec<&str> = {
            let mut seen = Vec::new();
            for t in texts {
                if !cache.contains_key(*t) && !seen.contains(t) {
                    seen.push(*t);
                }
            }
            seen
        };
        if !misses.is_empty() {
            let fresh = self.inner.embed_batch(&misses)?;
            for (text, vector) in misses.iter().zip(fresh) {
                cache.insert((*text).to_string(), vector);
            }
        }
        Ok(texts
            .iter()
            .map(|t| cache.get(*t).expect("just inserted").clone())
            .collect())
    }
}
