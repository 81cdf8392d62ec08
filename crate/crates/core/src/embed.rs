//! Dense document embeddings with a pluggable provider.
//!
//! The offline fallback provider derives a pseudo-random unit vector per
//! lemma from a seeded counter stream, so embeddings are fully deterministic
//! across runs and machines. The HTTP provider posts the lemma stream to an
//! external service and expects a JSON `{"vector": [...]}` response.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PreprocessedDoc;

/// Default embedding dimensionality for the fallback provider.
pub const DEFAULT_EMBED_DIM: usize = 256;
/// Default seed for the fallback provider.
pub const DEFAULT_EMBED_SEED: u64 = 42;
/// Environment variable holding the HTTP embedding service's bearer token.
pub const EMBED_KEY_ENV: &str = "EMBED_API_KEY";

/// Where document embeddings come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum EmbedProvider {
    /// Deterministic hashed lemma vectors; no network.
    Fallback { dim: usize, seed: u64 },
    /// External embedding service. The bearer token is read from
    /// `EMBED_API_KEY` at request time, never stored.
    Http { endpoint: String },
}

impl Default for EmbedProvider {
    fn default() -> Self {
        EmbedProvider::Fallback {
            dim: DEFAULT_EMBED_DIM,
            seed: DEFAULT_EMBED_SEED,
        }
    }
}

impl EmbedProvider {
    /// Short label used in reports and the index manifest.
    pub fn label(&self) -> String {
        match self {
            EmbedProvider::Fallback { dim, seed } => format!("fallback(dim={dim},seed={seed})"),
            EmbedProvider::Http { endpoint } => format!("http({endpoint})"),
        }
    }
}

/// FNV-1a 64-bit hash; stable across platforms.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// splitmix64 step; used both to whiten the seed and as the per-lemma
/// counter stream generator.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform f64 in [-1, 1) from a u64.
fn to_unit_interval(x: u64) -> f64 {
    // 53 high bits -> [0,1), then affine to [-1,1).
    (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Deterministic unit vector for one lemma: a splitmix64 stream seeded by
/// the lemma's FNV-1a hash mixed with the whitened global seed.
pub fn lemma_vector(lemma: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut whitened = seed;
    let whitened_seed = splitmix64(&mut whitened);
    let mut state = fnv1a64(lemma.as_bytes()) ^ whitened_seed;
    let mut v: Vec<f64> = (0..dim)
        .map(|_| to_unit_interval(splitmix64(&mut state)))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Computes document embeddings via the configured provider.
#[derive(Debug, Clone)]
pub struct Embedder {
    provider: EmbedProvider,
}

impl Embedder {
    pub fn new(provider: EmbedProvider) -> Self {
        Embedder { provider }
    }

    pub fn provider(&self) -> &EmbedProvider {
        &self.provider
    }

    /// Embeds a preprocessed document. Empty documents embed to the zero
    /// vector (dimension per provider default; HTTP callers still get a
    /// request so the service decides).
    pub fn embed_doc(&self, doc: &PreprocessedDoc) -> Result<Vec<f64>> {
        self.embed_lemmas(&doc.lemmas())
    }

    /// Embeds a lemma stream.
    pub fn embed_lemmas(&self, lemmas: &[String]) -> Result<Vec<f64>> {
        match &self.provider {
            EmbedProvider::Fallback { dim, seed } => Ok(fallback_embed(lemmas, *dim, *seed)),
            EmbedProvider::Http { endpoint } => http_embed(endpoint, lemmas),
        }
    }
}

/// Term-frequency-weighted mean of lemma unit vectors, L2-normalized.
/// Lemmas are aggregated through a BTreeMap so summation order (and thus
/// floating point rounding) is independent of input order permutations of
/// equal multisets.
fn fallback_embed(lemmas: &[String], dim: usize, seed: u64) -> Vec<f64> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in lemmas {
        *counts.entry(l.as_str()).or_insert(0) += 1;
    }
    let mut acc = vec![0.0f64; dim];
    for (lemma, count) in counts {
        let v = lemma_vector(lemma, dim, seed);
        let w = count as f64;
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += w * x;
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut acc {
            *x /= norm;
        }
    }
    acc
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Posts the joined lemma stream; expects `{"vector": [...]}`.
fn http_embed(endpoint: &str, lemmas: &[String]) -> Result<Vec<f64>> {
    let token = std::env::var(EMBED_KEY_ENV)
        .map_err(|_| Error::EmbedHttp(format!("{EMBED_KEY_ENV} is not set")))?;
    let body = serde_json::to_value(EmbedRequest {
        text: &lemmas.join(" "),
    })
    .expect("request serializes");
    let response = ureq::post(endpoint)
        .set("Authorization", &format!("Bearer {token}"))
        .set("Content-Type", "application/json")
        .send_json(body)
        .map_err(|e| Error::EmbedHttp(e.to_string()))?;
    let parsed: EmbedResponse = response
        .into_json()
        .map_err(|e| Error::EmbedHttp(format!("invalid response body: {e}")))?;
    Ok(parsed.vector)
}

/// Cosine similarity clamped to [0, 1]; checks dimensions. A zero vector on
/// either side yields 0.0.
pub fn embed_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemmas(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn lemma_vectors_are_unit_and_deterministic() {
        let v1 = lemma_vector("algorithm", 256, 42);
        let v2 = lemma_vector("algorithm", 256, 42);
        assert_eq!(v1, v2);
        let norm: f64 = v1.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn different_lemmas_and_seeds_differ() {
        assert_ne!(lemma_vector("alpha", 64, 42), lemma_vector("beta", 64, 42));
        assert_ne!(lemma_vector("alpha", 64, 42), lemma_vector("alpha", 64, 43));
    }

    #[test]
    fn doc_embedding_is_order_invariant() {
        let e = Embedder::new(EmbedProvider::default());
        let a = e
            .embed_lemmas(&lemmas(&["alpha", "beta", "alpha"]))
            .unwrap();
        let b = e
            .embed_lemmas(&lemmas(&["beta", "alpha", "alpha"]))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_doc_embeds_to_zero() {
        let e = Embedder::new(EmbedProvider::default());
        let v = e.embed_lemmas(&[]).unwrap();
        assert_eq!(v, vec![0.0; DEFAULT_EMBED_DIM]);
    }

    #[test]
    fn self_similarity_is_one() {
        let e = Embedder::new(EmbedProvider::default());
        let v = e
            .embed_lemmas(&lemmas(&["alpha", "beta", "gamma"]))
            .unwrap();
        assert!((embed_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unrelated_docs_similarity_is_small() {
        let e = Embedder::new(EmbedProvider::default());
        let a = e
            .embed_lemmas(&lemmas(&["zephyr", "quokka", "obelisk"]))
            .unwrap();
        let b = e
            .embed_lemmas(&lemmas(&["revenue", "quarter", "margin"]))
            .unwrap();
        let sim = embed_similarity(&a, &b).unwrap();
        // Random unit vectors in 256 dims concentrate near orthogonality;
        // the clamp keeps negatives at zero.
        assert!(sim < 0.25, "similarity unexpectedly high: {sim}");
    }

    #[test]
    fn zero_vector_scores_zero() {
        let z = vec![0.0; 4];
        let v = vec![1.0, 0.0, 0.0, 0.0];
        assert_eq!(embed_similarity(&z, &v).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = vec![1.0, 2.0];
        let b = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            embed_similarity(&a, &b),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn negative_cosine_clamps_to_zero() {
        let a = vec![1.0, 0.0];
        let b = vec![-1.0, 0.0];
        assert_eq!(embed_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn http_provider_requires_credential_env() {
        // Clear inherited credentials for this check.
        std::env::remove_var(EMBED_KEY_ENV);
        let e = Embedder::new(EmbedProvider::Http {
            endpoint: "http://127.0.0.1:1/embed".to_string(),
        });
        let err = e.embed_lemmas(&lemmas(&["alpha"])).unwrap_err();
        assert!(err.to_string().contains(EMBED_KEY_ENV), "{err}");
    }
}
