//! Text embeddings: remote provider client and deterministic fallback.
//!
//! The provider contract is one POST endpoint: `{endpoint}/embed` takes
//! `{"model": str, "texts": [str], "granularity"?: "token"}` and returns
//! `{"vectors": [[f64]]}`. Requests go out in fixed-size batches, carry an
//! optional bearer token read from a named environment variable, and are
//! retried up to three times with doubling backoff. Responses are
//! L2-normalized on receipt and can be cached on disk keyed by
//! `(model, granularity, text)`.
//!
//! The literal endpoint `"fallback"` selects a fully offline embedder:
//! hashed character trigrams with signed buckets. It needs no network, no
//! state, and is a pure function of `(text, dimension, seed)`, so runs remain
//! reproducible anywhere.
//!
//! Empty texts are never sent anywhere; they embed to zero rows and are
//! reported to the caller.

use std::path::PathBuf;
use std::time::Duration;

use ndarray::Array2;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{TextAttributedGraph, TextDirection};

/// Default environment variable consulted for the bearer token.
pub const DEFAULT_AUTH_ENV: &str = "EMBED_API_KEY";

/// 64-bit FNV-1a over `bytes`, with the seed folded into the offset basis.
///
/// Stable across platforms and releases; both the fallback embedder and seed
/// derivation build on it.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashed-trigram embedding: every character trigram of the trimmed text
/// lands in a signed bucket, rows are L2-normalized. Texts with fewer than
/// three characters after trimming (blank ones included) embed to exactly
/// zero. Requires `dim >= 8`.
pub fn fallback_embed<S: AsRef<str>>(texts: &[S], dim: usize, seed: u64) -> Result<Array2<f64>> {
    if dim < 8 {
        return Err(Error::InvalidConfig(format!(
            "fallback embedding dimension must be >= 8, got {dim}"
        )));
    }
    let mut out = Array2::<f64>::zeros((texts.len(), dim));
    for (row, text) in texts.iter().enumerate() {
        let chars: Vec<char> = text.as_ref().trim().chars().collect();
        if chars.len() < 3 {
            continue;
        }
        let mut buf = [0u8; 12];
        for w in chars.windows(3) {
            let mut len = 0;
            for c in w {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let h = fnv1a64(seed, &buf[..len]);
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            let bucket = ((h >> 1) % dim as u64) as usize;
            out[[row, bucket]] += sign;
        }
        let norm: f64 = out.row(row).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.row_mut(row).mapv_inplace(|v| v / norm);
        }
    }
    Ok(out)
}

/// Where embeddings come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderEndpoint {
    /// Offline hashed-trigram embedder.
    Fallback,
    /// Base URL of an embedding service.
    Remote(String),
}

impl ProviderEndpoint {
    /// `"fallback"` selects the offline embedder, anything else is a URL.
    pub fn parse(s: &str) -> ProviderEndpoint {
        if s == "fallback" {
            ProviderEndpoint::Fallback
        } else {
            ProviderEndpoint::Remote(s.trim_end_matches('/').to_owned())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            ProviderEndpoint::Fallback => "fallback",
            ProviderEndpoint::Remote(url) => url,
        }
    }
}

/// Configuration of one embedding source.
#[derive(Debug, Clone)]
pub struct EmbeddingProvider {
    pub endpoint: ProviderEndpoint,
    pub model: String,
    pub dimension: usize,
    pub batch_size: usize,
    pub timeout: Duration,
    /// Environment variable holding the bearer token; unset variable means
    /// unauthenticated requests.
    pub auth_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
    /// Initial retry backoff, doubled after every failed attempt.
    pub retry_backoff: Duration,
    /// Seed for the fallback embedder; ignored for remote endpoints.
    pub fallback_seed: u64,
}

impl EmbeddingProvider {
    pub fn fallback(dimension: usize, fallback_seed: u64) -> EmbeddingProvider {
        EmbeddingProvider {
            endpoint: ProviderEndpoint::Fallback,
            model: "hashed-trigram".into(),
            dimension,
            batch_size: 64,
            timeout: Duration::from_secs(30),
            auth_env: Some(DEFAULT_AUTH_ENV.into()),
            cache_dir: None,
            retry_backoff: Duration::from_millis(250),
            fallback_seed,
        }
    }

    pub fn remote(endpoint: &str, model: &str, dimension: usize) -> EmbeddingProvider {
        EmbeddingProvider {
            endpoint: ProviderEndpoint::parse(endpoint),
            model: model.to_owned(),
            dimension,
            batch_size: 64,
            timeout: Duration::from_secs(30),
            auth_env: Some(DEFAULT_AUTH_ENV.into()),
            cache_dir: None,
            retry_backoff: Duration::from_millis(250),
            fallback_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        if matches!(self.endpoint, ProviderEndpoint::Fallback) && self.dimension < 8 {
            return Err(Error::InvalidConfig(format!(
                "fallback embedding dimension must be >= 8, got {}",
                self.dimension
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable description of everything that shapes this provider's output.
    pub fn fingerprint_seed(&self) -> String {
        match &self.endpoint {
            ProviderEndpoint::Fallback => format!(
                "endpoint=fallback;model={};dim={};seed={}",
                self.model, self.dimension, self.fallback_seed
            ),
            ProviderEndpoint::Remote(url) => format!(
                "endpoint={};model={};dim={}",
                url, self.model, self.dimension
            ),
        }
    }

    /// Embed whole texts (document granularity).
    pub fn embed_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<EmbeddedTexts> {
        self.embed_with_granularity(texts, None)
    }

    /// Embed single tokens; remote requests carry `"granularity": "token"`.
    pub fn embed_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Array2<f64>> {
        Ok(self.embed_with_granularity(tokens, Some("token"))?.matrix)
    }

    fn embed_with_granularity<S: AsRef<str>>(
        &self,
        texts: &[S],
        granularity: Option<&str>,
    ) -> Result<EmbeddedTexts> {
        self.validate()?;
        let empty_rows: Vec<usize> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_ref().trim().is_empty())
            .map(|(i, _)| i)
            .collect();
        let matrix = match &self.endpoint {
            ProviderEndpoint::Fallback => {
                fallback_embed(texts, self.dimension, self.fallback_seed)?
            }
            ProviderEndpoint::Remote(url) => self.embed_remote(url, texts, granularity)?,
        };
        Ok(EmbeddedTexts { matrix, empty_rows })
    }

    fn cache_path(&self, granularity: Option<&str>, text: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut h = Sha256::new();
        h.update(self.model.as_bytes());
        h.update([0u8]);
        h.update(granularity.unwrap_or("document").as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        Some(dir.join(format!("{}.vec", hex::encode(h.finalize()))))
    }

    fn cache_read(&self, granularity: Option<&str>, text: &str) -> Option<Vec<f64>> {
        let path = self.cache_path(granularity, text)?;
        let bytes = std::fs::read(path).ok()?;
        if bytes.len() != self.dimension * 8 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        )
    }

    fn cache_write(&self, granularity: Option<&str>, text: &str, row: &[f64]) -> Result<()> {
        let Some(path) = self.cache_path(granularity, text) else {
            return Ok(());
        };
        if let Some(dir) = &self.cache_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        let mut bytes = Vec::with_capacity(row.len() * 8);
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    fn embed_remote<S: AsRef<str>>(
        &self,
        url: &str,
        texts: &[S],
        granularity: Option<&str>,
    ) -> Result<Array2<f64>> {
        let mut out = Array2::<f64>::zeros((texts.len(), self.dimension));
        let mut pending: Vec<usize> = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let t = text.as_ref();
            if t.trim().is_empty() {
                continue;
            }
            if let Some(row) = self.cache_read(granularity, t) {
                for (j, v) in row.into_iter().enumerate() {
                    out[[i, j]] = v;
                }
                continue;
            }
            pending.push(i);
        }
        for batch in pending.chunks(self.batch_size) {
            let batch_texts: Vec<&str> = batch.iter().map(|&i| texts[i].as_ref()).collect();
            let mut payload = serde_json::json!({
                "model": self.model,
                "texts": batch_texts,
            });
            if let Some(g) = granularity {
                payload["granularity"] = serde_json::Value::String(g.into());
            }
            let body = post_json_with_retry(
                &format!("{url}/embed"),
                self.auth_env.as_deref(),
                self.timeout,
                self.retry_backoff,
                &payload,
            )
            .map_err(Error::Provider)?;
            #[derive(Deserialize)]
            struct EmbedResponse {
                vectors: Vec<Vec<f64>>,
            }
            let resp: EmbedResponse = serde_json::from_value(body)
                .map_err(|e| Error::Provider(format!("malformed embed response: {e}")))?;
            if resp.vectors.len() != batch.len() {
                return Err(Error::Provider(format!(
                    "asked for {} vectors, got {}",
                    batch.len(),
                    resp.vectors.len()
                )));
            }
            for (&i, mut row) in batch.iter().zip(resp.vectors) {
                if row.len() != self.dimension {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{}-dimensional vector", self.dimension),
                        got: format!("{}-dimensional vector", row.len()),
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: "embedding provider response".into(),
                    });
                }
                let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for v in row.iter_mut() {
                        *v /= norm;
                    }
                }
                self.cache_write(granularity, texts[i].as_ref(), &row)?;
                for (j, v) in row.into_iter().enumerate() {
                    out[[i, j]] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Embedding rows aligned with the input texts; rows listed in `empty_rows`
/// are exactly zero because the input had no content.
#[derive(Debug)]
pub struct EmbeddedTexts {
    pub matrix: Array2<f64>,
    pub empty_rows: Vec<usize>,
}

/// Which attached documents represent a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextSubset {
    /// All attached documents, or the node's own text if it has none.
    All,
    /// Only documents tagged as sent.
    Sent,
    /// Only documents tagged as received.
    Received,
}

impl TextSubset {
    fn label(self) -> &'static str {
        match self {
            TextSubset::All => "all",
            TextSubset::Sent => "sent",
            TextSubset::Received => "received",
        }
    }

    fn matches(self, direction: Option<TextDirection>) -> bool {
        match self {
            TextSubset::All => true,
            TextSubset::Sent => direction == Some(TextDirection::Sent),
            TextSubset::Received => direction == Some(TextDirection::Received),
        }
    }
}

/// Texts representing a node under `subset`: matching attached documents if
/// it has any, otherwise its own text (empty when missing).
pub fn node_texts(graph: &TextAttributedGraph, id: u32, subset: TextSubset) -> Result<Vec<String>> {
    let extras = graph.extra_texts(id)?;
    let picked: Vec<String> = extras
        .iter()
        .filter(|e| subset.matches(e.direction))
        .map(|e| e.text.clone())
        .collect();
    if !picked.is_empty() {
        return Ok(picked);
    }
    let own = graph.text(id)?;
    if own.is_empty() {
        Ok(Vec::new())
    } else {
        Ok(vec![own.to_owned()])
    }
}

/// Text embedding for every node: multi-document nodes get the re-normalized
/// arithmetic mean of their documents' embeddings; nodes without any text
/// under `subset` get a zero row.
pub fn graph_text_embeddings(
    provider: &EmbeddingProvider,
    graph: &TextAttributedGraph,
    subset: TextSubset,
) -> Result<EmbeddingMatrix> {
    provider.validate()?;
    let n = graph.node_count();
    let mut flat: Vec<String> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(n);
    for id in 0..n as u32 {
        let texts = node_texts(graph, id, subset)?;
        let start = flat.len();
        flat.extend(texts);
        spans.push((start, flat.len()));
    }
    let embedded = provider.embed_texts(&flat)?;
    let mut rows = Array2::<f64>::zeros((n, provider.dimension));
    for (i, &(lo, hi)) in spans.iter().enumerate() {
        if lo == hi {
            continue;
        }
        let count = (hi - lo) as f64;
        for r in lo..hi {
            let src = embedded.matrix.row(r);
            let mut dst = rows.row_mut(i);
            for j in 0..provider.dimension {
                dst[j] += src[j] / count;
            }
        }
        let norm: f64 = rows.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            rows.row_mut(i).mapv_inplace(|v| v / norm);
        }
    }
    let fp = text_embedding_fingerprint(graph, provider, subset);
    EmbeddingMatrix::new(rows, EmbeddingKind::Text, fp)
}

/// Fingerprint [`graph_text_embeddings`] would stamp on its output, computed
/// without embedding anything. Lets consumers check a stored matrix against
/// the current graph and provider configuration.
pub fn text_embedding_fingerprint(
    graph: &TextAttributedGraph,
    provider: &EmbeddingProvider,
    subset: TextSubset,
) -> String {
    let mut h = Sha256::new();
    h.update(b"text\x00");
    h.update(graph.content_hash().as_bytes());
    h.update(b"\x00");
    h.update(provider.fingerprint_seed().as_bytes());
    h.update(b"\x00subset=");
    h.update(subset.label().as_bytes());
    hex::encode(h.finalize())
}

/// Cosine similarity between two text embedding rows (zero rows score 0).
pub fn text_similarity(emb: &EmbeddingMatrix, i: u32, j: u32) -> Result<f64> {
    emb.expect_kind(EmbeddingKind::Text)?;
    Ok(crate::embedding::cosine(emb.row(i)?, emb.row(j)?))
}

/// POST `payload` to `url` with up to three attempts and doubling backoff.
/// Returns the parsed JSON body or a description of the final failure.
pub(crate) fn post_json_with_retry(
    url: &str,
    auth_env: Option<&str>,
    timeout: Duration,
    backoff: Duration,
    payload: &serde_json::Value,
) -> std::result::Result<serde_json::Value, String> {
    let agent = ureq::AgentBuilder::new().timeout(timeout).build();
    let token = auth_env.and_then(|var| std::env::var(var).ok());
    let mut wait = backoff;
    let mut last_err = String::new();
    for attempt in 0..3 {
        if attempt > 0 {
            std::thread::sleep(wait);
            wait *= 2;
        }
        let mut req = agent.post(url);
        if let Some(token) = &token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(payload.clone()) {
            Ok(resp) => match resp.into_json::<serde_json::Value>() {
                Ok(v) => return Ok(v),
                Err(e) => last_err = format!("invalid JSON from {url}: {e}"),
            },
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                last_err = format!("{url} returned {code}: {body}");
            }
            Err(e) => last_err = format!("{url}: {e}"),
        }
    }
    Err(format!("3 attempts failed, last: {last_err}"))
}
