use std::hash::Hasher;
use std::time::Duration;

use async_trait::async_trait;
use fnv::FnvHasher;
use serde::Deserialize;

use crate::error::{Error, Result};

pub const HASH_EMBEDDER_DIMENSION: usize = 256;
const HASH_EMBEDDER_SEED: u64 = 0x6c65_6166_7475_746f;

#[async_trait]
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    async fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Lowercased tokens split on every non-alphanumeric char.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Scales `v` to unit L2 norm in place; the zero vector is left alone.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Offline feature-hashing embedder: token counts hashed into a fixed
/// number of buckets, then L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dimension: HASH_EMBEDDER_DIMENSION,
            seed: HASH_EMBEDDER_SEED,
        }
    }
}

impl HashEmbedder {
    pub fn bucket(&self, token: &str) -> usize {
        let mut h = FnvHasher::with_key(self.seed);
        h.write(token.as_bytes());
        (h.finish() % self.dimension as u64) as usize
    }

    pub fn embed_sync(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize(text) {
            v[self.bucket(&token)] += 1.0;
        }
        l2_normalize(&mut v);
        v
    }
}

#[async_trait]
impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "hash256"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed_sync(text))
    }
}

/// Client for an OpenAI-style `/embeddings` endpoint.
pub struct ExternalEmbedder {
    http: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl ExternalEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        dimension: usize,
        timeout: Duration,
    ) -> Result<Self> {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("embedding client: {e}")))?;
        Ok(Self {
            http,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            dimension,
        })
    }
}

#[async_trait]
impl Embedder for ExternalEmbedder {
    fn name(&self) -> &str {
        "external"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if tokenize(text).next().is_none() {
            return Ok(vec![0.0; self.dimension]);
        }
        let mut req = self
            .http
            .post(&self.endpoint)
            .json(&serde_json::json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let unavailable = |e: reqwest::Error| Error::ProviderUnavailable(e.to_string());
        let body: EmbeddingResponse = req
            .send()
            .await
            .and_then(|r| r.error_for_status())
            .map_err(unavailable)?
            .json()
            .await
            .map_err(unavailable)?;
        let mut v = body
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| Error::ProviderUnavailable("empty embedding response".into()))?;
        if v.len() != self.dimension {
            return Err(Error::ProviderUnavailable(format!(
                "expected {} dimensions, got {}",
                self.dimension,
                v.len()
            )));
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}
