//! Embedding vectors and the similarity math shared by every other module.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("vector contains a non-finite component")]
    NonFinite,
}

/// An embedding stored unnormalized, with its Euclidean norm cached at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    vector: Vec<f64>,
    model_id: String,
    norm: f64,
}

impl Embedding {
    pub fn new(vector: Vec<f64>, model_id: impl Into<String>) -> Result<Self, VectorError> {
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(VectorError::NonFinite);
        }
        let norm = l2_norm(&vector);
        Ok(Self {
            vector,
            model_id: model_id.into(),
            norm,
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn into_vector(self) -> Vec<f64> {
        self.vector
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dimension(&self) -> usize {
        self.vector.len()
    }

    pub fn cosine(&self, other: &Embedding) -> Result<f64, VectorError> {
        cosine_with_norms(&self.vector, self.norm, &other.vector, other.norm)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Cosine similarity of two raw slices.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, VectorError> {
    cosine_with_norms(a, l2_norm(a), b, l2_norm(b))
}

fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> Result<f64, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if na == 0.0 || nb == 0.0 {
        return Err(VectorError::ZeroNorm);
    }
    // Self-similarity must be exactly 1 so that a stored vector is rejected
    // even at delta = 1; rounding elsewhere can push |cos| a hair past 1.
    if a == b {
        return Ok(1.0);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Arithmetic mean of raw vectors. Returns `None` for an empty input.
pub fn mean_vector<'a, I>(vectors: I) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next()?;
    let mut acc: Vec<f64> = first.to_vec();
    let mut count = 1usize;
    for v in iter {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        count += 1;
    }
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec(), "test").unwrap()
    }

    #[test]
    fn identical_vectors_have_unit_similarity() {
        let a = emb(&[0.3, -1.2, 4.0]);
        assert!((a.cosine(&a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_vectors() {
        assert_eq!(emb(&[1.0, 0.0]).cosine(&emb(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_against_axis() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let c = emb(&[1.0, 0.0]).cosine(&emb(&[s, s])).unwrap();
        assert!((c - 0.707_106_781_186_547_5).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_is_an_error() {
        let z = emb(&[0.0, 0.0]);
        assert_eq!(z.cosine(&emb(&[1.0, 0.0])), Err(VectorError::ZeroNorm));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = emb(&[1.0]).cosine(&emb(&[1.0, 0.0]));
        assert!(matches!(r, Err(VectorError::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_nan() {
        assert_eq!(
            Embedding::new(vec![f64::NAN], "m"),
            Err(VectorError::NonFinite)
        );
    }

    #[test]
    fn cached_norm_matches() {
        let e = emb(&[3.0, 4.0]);
        assert!((e.norm() - 5.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            s in 0.01f64..100.0,
        ) {
            let ea = emb(&a);
            let eb = emb(&b);
            proptest::prop_assume!(ea.norm() > 1e-6 && eb.norm() > 1e-6);
            let ab = ea.cosine(&eb).unwrap();
            let ba = eb.cosine(&ea).unwrap();
            proptest::prop_assert!((ab - ba).abs() < 1e-12);
            let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
            let es = emb(&scaled);
            proptest::prop_assert!((es.cosine(&eb).unwrap() - ab).abs() < 1e-9);
            proptest::prop_assert!((ea.cosine(&ea).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
