//! Text-embedding interface and the deterministic stub encoder.
//!
//! Real deployments plug a model server in behind [`Encoder`]; everything
//! in this crate (and all tests) runs against [`HashedBagEncoder`], which
//! hashes each token to a pseudo-random unit vector and averages them.
//! Shared tokens therefore raise cosine similarity, giving the stub the
//! qualitative behavior of a sentence encoder while staying fully
//! reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::text::tokenize;

/// Default embedding width used across the crate.
pub const DEFAULT_DIMENSION: usize = 384;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector")]
    ZeroVector,
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("encoder failure: {0}")]
    Failure(String),
}

/// A fixed-length real vector with its Euclidean norm cached at
/// construction. Zero vectors are representable but rejected by the
/// indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        let norm = values.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        Self { values, norm }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    /// Scale to unit norm. Errors on the zero vector.
    pub fn normalized(&self) -> Result<EmbeddingVector, VectorError> {
        if self.is_zero() {
            return Err(VectorError::ZeroVector);
        }
        let inv = 1.0 / self.norm;
        Ok(EmbeddingVector::new(
            self.values.iter().map(|v| (*v as f64 * inv) as f32).collect(),
        ))
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64, VectorError> {
        if self.dimension() != other.dimension() {
            return Err(VectorError::DimensionMismatch {
                left: self.dimension(),
                right: other.dimension(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum())
    }
}

/// Cosine similarity in [-1, 1]. Errors on mismatched dimensions or a
/// zero operand.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    if a.is_zero() || b.is_zero() {
        return Err(VectorError::ZeroVector);
    }
    let dot = a.dot(b)?;
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}

/// Pluggable text encoder. Implementations must be deterministic per
/// input and safe to share across threads.
pub trait Encoder: Send + Sync {
    fn dimension(&self) -> usize;
    fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError>;
}

/// Deterministic stub encoder: each token maps to a seeded pseudo-random
/// unit vector; a text embeds as the normalized sum of its token vectors
/// (with multiplicity). Tokenization matches the BM25 tokenizer.
#[derive(Debug, Clone)]
pub struct HashedBagEncoder {
    dimension: usize,
    seed: u64,
}

impl Default for HashedBagEncoder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION, 0)
    }
}

impl HashedBagEncoder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension, seed }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(token) ^ self.seed);
        let mut v = vec![0.0f64; self.dimension];
        let mut i = 0;
        // Box-Muller pairs; direction uniform on the sphere after
        // normalization.
        while i < self.dimension {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            v[i] = r * theta.cos();
            if i + 1 < self.dimension {
                v[i + 1] = r * theta.sin();
            }
            i += 2;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl Encoder for HashedBagEncoder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError> {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            // Untokenizable input still gets a stable non-zero vector.
            tokens.push(format!("raw:{text}"));
        }
        let mut acc = vec![0.0f64; self.dimension];
        for token in &tokens {
            for (a, t) in acc.iter_mut().zip(self.token_vector(token)) {
                *a += t;
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EncodeError::Failure("token vectors cancelled".into()));
        }
        Ok(EmbeddingVector::new(
            acc.iter().map(|x| (*x / norm) as f32).collect(),
        ))
    }
}

fn fnv1a64(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_identity() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cosine_orthogonal() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![0.0, 1.0]);
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_computed() {
        // (1,2,3).(4,5,6) / (|a||b|) = 32 / (sqrt(14) sqrt(77))
        let a = EmbeddingVector::new(vec![1.0, 2.0, 3.0]);
        let b = EmbeddingVector::new(vec![4.0, 5.0, 6.0]);
        assert!((cosine(&a, &b).unwrap() - 0.9746318461970762).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatch() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let z = EmbeddingVector::new(vec![0.0, 0.0]);
        assert_eq!(cosine(&a, &z), Err(VectorError::ZeroVector));
        let c = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine(&a, &c),
            Err(VectorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_symmetric() {
        let enc = HashedBagEncoder::new(64, 7);
        let a = enc.encode("alpha beta gamma").unwrap();
        let b = enc.encode("beta delta").unwrap();
        assert!((cosine(&a, &b).unwrap() - cosine(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn stub_is_deterministic_and_unit_norm() {
        let enc = HashedBagEncoder::default();
        let a = enc.encode("graph expansion").unwrap();
        let b = enc.encode("graph expansion").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(a.dimension(), DEFAULT_DIMENSION);
    }

    #[test]
    fn shared_tokens_raise_similarity() {
        let enc = HashedBagEncoder::new(128, 3);
        let a = enc.encode("red fox jumps").unwrap();
        let b = enc.encode("red fox sleeps").unwrap();
        let c = enc.encode("quantum flux capacitor").unwrap();
        assert!(cosine(&a, &b).unwrap() > cosine(&a, &c).unwrap());
    }

    #[test]
    fn identical_text_has_unit_cosine() {
        let enc = HashedBagEncoder::default();
        let a = enc.encode("same words here").unwrap();
        let b = enc.encode("same words here").unwrap();
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-6);
    }
}
