//! Text embedding boundary.
//!
//! [`HashEmbedder`] is the offline embedder used by tests and fixtures: each
//! lowercase alphanumeric token is hashed (seeded XxHash64) into the seed of a
//! ChaCha8 stream, which yields a standard-normal vector for that token. A
//! text's embedding is the L2-normalized sum of its token vectors, so texts
//! that share tokens land close together. [`ServiceEmbedder`] forwards to an
//! external HTTP embedding service.

use std::hash::Hasher;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twox_hash::XxHash64;

use crate::par;

pub const DEFAULT_TEST_DIMENSION: usize = 32;
pub const DEFAULT_SERVICE_DIMENSION: usize = 384;
pub const DEFAULT_SEED: u64 = 42;

/// Token used when a text has no alphanumeric tokens at all.
const EMPTY_TOKEN: &str = "∅";

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("no texts to embed")]
    NoTexts,
    #[error("text {0} is empty")]
    EmptyText(usize),
    #[error("embedder unavailable: {0}")]
    Unavailable(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid embedder configuration: {0}")]
    InvalidConfig(String),
}

/// Unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit L2 length. Returns `None` for a zero or
    /// non-finite vector.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = l2_norm(&values);
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for v in &mut values {
            *v /= norm;
        }
        Some(EmbeddingVector { values })
    }

    /// Wraps values that are already unit length (e.g. read from a snapshot).
    pub fn from_unit(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    Ok(cosine_slices(a.values(), b.values()))
}

pub(crate) fn cosine_slices(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(a, b) / denom).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    DeterministicTest,
    ExternalService,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub embedder_kind: EmbedderKind,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl EmbedderConfig {
    pub fn deterministic(seed: u64, dimension: usize) -> Self {
        EmbedderConfig {
            embedder_kind: EmbedderKind::DeterministicTest,
            dimension,
            seed: Some(seed),
            endpoint: None,
        }
    }

    pub fn service(endpoint: impl Into<String>) -> Self {
        EmbedderConfig {
            embedder_kind: EmbedderKind::ExternalService,
            dimension: DEFAULT_SERVICE_DIMENSION,
            seed: None,
            endpoint: Some(endpoint.into()),
        }
    }

    /// Service embedder from `EMBED_URL`, if set.
    pub fn service_from_env() -> Option<Self> {
        std::env::var("EMBED_URL").ok().map(Self::service)
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        if self.dimension == 0 {
            return Err(EmbedError::InvalidConfig(
                "dimension must be positive".into(),
            ));
        }
        match self.embedder_kind {
            EmbedderKind::DeterministicTest => Ok(Box::new(HashEmbedder::new(
                self.seed.unwrap_or(DEFAULT_SEED),
                self.dimension,
            ))),
            EmbedderKind::ExternalService => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    EmbedError::InvalidConfig("service embedder needs an endpoint".into())
                })?;
                Ok(Box::new(ServiceEmbedder::new(endpoint, self.dimension)))
            }
        }
    }
}

pub trait Embedder: Send + Sync {
    fn config(&self) -> EmbedderConfig;

    fn dimension(&self) -> usize {
        self.config().dimension
    }

    /// One unit vector per input text, in input order.
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_texts(&[text.to_string()])?;
        Ok(out.remove(0))
    }
}

fn check_inputs(texts: &[String]) -> Result<(), EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::NoTexts);
    }
    match texts.iter().position(|t| t.trim().is_empty()) {
        Some(index) => Err(EmbedError::EmptyText(index)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: u64,
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(seed: u64, dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashEmbedder { seed, dimension }
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }

    fn token_vector(&self, token: &str) -> impl Iterator<Item = f64> {
        let mut hasher = XxHash64::with_seed(self.seed);
        hasher.write(token.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(hasher.finish());
        (0..self.dimension).map(move |_| StandardNormal.sample(&mut rng))
    }

    fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut sum = vec![0.0; self.dimension];
        for token in Self::tokens(text) {
            for (acc, v) in sum.iter_mut().zip(self.token_vector(&token)) {
                *acc += v;
            }
        }
        EmbeddingVector::normalized(sum).unwrap_or_else(|| {
            let fallback: Vec<f64> = self.token_vector(EMPTY_TOKEN).collect();
            EmbeddingVector::normalized(fallback).expect("gaussian vector is non-zero")
        })
    }
}

impl Embedder for HashEmbedder {
    fn config(&self) -> EmbedderConfig {
        EmbedderConfig::deterministic(self.seed, self.dimension)
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_inputs(texts)?;
        Ok(par::map(texts, |t| self.embed_text(t)))
    }
}

/// `POST {endpoint}` with `{"texts": [...]}`, expecting `{"vectors": [[...]]}`.
pub struct ServiceEmbedder {
    endpoint: String,
    dimension: usize,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ServiceResponse {
    vectors: Vec<Vec<f64>>,
}

impl ServiceEmbedder {
    pub fn new(endpoint: String, dimension: usize) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(60))
            .build();
        ServiceEmbedder {
            endpoint,
            dimension,
            agent,
        }
    }
}

impl Embedder for ServiceEmbedder {
    fn config(&self) -> EmbedderConfig {
        EmbedderConfig {
            embedder_kind: EmbedderKind::ExternalService,
            dimension: self.dimension,
            seed: None,
            endpoint: Some(self.endpoint.clone()),
        }
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_inputs(texts)?;
        let response: ServiceResponse = self
            .agent
            .post(&self.endpoint)
            .send_json(serde_json::json!({ "texts": texts }))
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?
            .into_json()
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        if response.vectors.len() != texts.len() {
            return Err(EmbedError::Unavailable(format!(
                "service returned {} vectors for {} texts",
                response.vectors.len(),
                texts.len()
            )));
        }
        response
            .vectors
            .into_iter()
            .map(|values| {
                if values.len() != self.dimension {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dimension,
                        found: values.len(),
                    });
                }
                EmbeddingVector::normalized(values)
                    .ok_or_else(|| EmbedError::Unavailable("service returned a zero vector".into()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    /// Plain dot / (|a| |b|) computed without any of the module's helpers.
    fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
        let mut ab = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for i in 0..a.len() {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
            bb += b[i] * b[i];
        }
        ab / (aa.sqrt() * bb.sqrt())
    }

    #[test]
    fn golden_seed_42_dim_8_python() {
        let v = HashEmbedder::new(42, 8).embed_one("python").unwrap();
        let golden = [
            -0.08712834749386576,
            -0.19844545157361174,
            0.10175933674126855,
            0.8057985645545649,
            -0.46031279276786974,
            0.1709585657315974,
            -0.09548350139599894,
            0.20767755569370755,
        ];
        for (got, want) in v.values().iter().zip(golden) {
            assert!((got - want).abs() < 1e-12, "{:?}", v.values());
        }
    }

    #[test]
    fn equal_texts_equal_vectors() {
        let e = HashEmbedder::new(42, DEFAULT_TEST_DIMENSION);
        let out = e.embed_texts(&strings(&["x", "x"])).unwrap();
        assert_eq!(out[0], out[1]);
        assert!((out[0].norm() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn tokenization_ignores_case_and_punctuation() {
        let e = HashEmbedder::new(7, 16);
        assert_eq!(
            e.embed_one("Rust, SQL!").unwrap(),
            e.embed_one("rust sql").unwrap()
        );
    }

    #[test]
    fn no_token_text_uses_empty_token_vector() {
        let e = HashEmbedder::new(42, 16);
        let v = e.embed_one("--- !!! ---").unwrap();
        assert!((v.norm() - 1.0).abs() <= 1e-6);
        assert_eq!(v, e.embed_one("...").unwrap());
    }

    #[test]
    fn input_errors() {
        let e = HashEmbedder::new(42, 8);
        assert_eq!(e.embed_texts(&[]), Err(EmbedError::NoTexts));
        assert_eq!(
            e.embed_texts(&strings(&["a", "  "])),
            Err(EmbedError::EmptyText(1))
        );
    }

    #[test]
    fn shared_tokens_raise_similarity() {
        let e = HashEmbedder::new(42, 64);
        let a = e.embed_one("kubernetes container orchestration").unwrap();
        let b = e
            .embed_one("container orchestration with kubernetes clusters")
            .unwrap();
        let c = e.embed_one("watercolor painting for beginners").unwrap();
        assert!(cosine(&a, &b).unwrap() > cosine(&a, &c).unwrap());
    }

    #[test]
    fn cosine_basics() {
        let e1 = EmbeddingVector::from_unit(vec![1.0, 0.0]);
        let e2 = EmbeddingVector::from_unit(vec![0.0, 1.0]);
        assert_eq!(cosine(&e1, &e1).unwrap(), 1.0);
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        let e3 = EmbeddingVector::from_unit(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine(&e1, &e3),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_matches_naive_oracle_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let va = EmbeddingVector::from_unit(a.clone());
            let vb = EmbeddingVector::from_unit(b.clone());
            let ab = cosine(&va, &vb).unwrap();
            assert!((ab - naive_cosine(&a, &b)).abs() <= 1e-9);
            assert!((ab - cosine(&vb, &va).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn config_round_trip_builds_same_embedder() {
        let e = HashEmbedder::new(42, 32);
        let rebuilt = e.config().build().unwrap();
        assert_eq!(rebuilt.embed_one("go").unwrap(), e.embed_one("go").unwrap());
        let bad = EmbedderConfig::deterministic(1, 0);
        assert!(bad.build().is_err());
        assert_eq!(EmbedderConfig::service("http://x").dimension, 384);
    }

    #[test]
    fn unreachable_service_is_unavailable() {
        let e = ServiceEmbedder::new("http://127.0.0.1:9/embed".into(), 4);
        assert!(matches!(e.embed_one("x"), Err(EmbedError::Unavailable(_))));
    }

    proptest! {
        #[test]
        fn permutation_equivariant(texts in prop::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,3}", 1..8), rot in 0usize..8) {
            let e = HashEmbedder::new(42, 16);
            let base = e.embed_texts(&texts).unwrap();
            let mut permuted = texts.clone();
            let k = rot % texts.len();
            permuted.rotate_left(k);
            let mut expected = base.clone();
            expected.rotate_left(k);
            prop_assert_eq!(e.embed_texts(&permuted).unwrap(), expected);
        }

        #[test]
        fn always_unit_norm(text in "\\PC{1,60}") {
            prop_assume!(!text.trim().is_empty());
            let v = HashEmbedder::new(3, 32).embed_one(&text).unwrap();
            prop_assert!((v.norm() - 1.0).abs() <= 1e-6);
        }
    }
}
