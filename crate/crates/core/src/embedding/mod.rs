//! Unit-norm semantic embeddings, similarity, and the cached embedding store.
//!
//! Every vector is normalized when it enters the system, so similarity is a
//! plain dot product. Reward code only ever sees [`reward_sim`], which clamps
//! negative cosines to zero.

mod hashed;
mod remote;
mod store;
mod table;

pub use hashed::HashedProvider;
pub use remote::{RemoteConfig, RemoteProvider};
pub use store::{CacheStats, EmbeddingProvider, EmbeddingSource, EmbeddingStore, ProviderInfo, SourceMode};
pub use table::TableProvider;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_DIM: usize = 384;

/// Fixed-length, unit-norm, finite vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Normalizes `values` to unit Euclidean norm.
    pub fn normalized(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidVector("zero-length vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVector("non-finite component".into()));
        }
        // Scale first so large magnitudes cannot overflow the squared sum.
        let peak = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if peak == T::zero() {
            return Err(Error::InvalidVector("zero vector".into()));
        }
        let scaled: Vec<T> = values.iter().map(|&v| v / peak).collect();
        let norm = scaled.iter().map(|&v| v * v).sum::<T>().sqrt();
        Ok(Self {
            values: scaled.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Normalized arithmetic mean of `members`.
    pub fn mean_of<'a, I>(members: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a EmbeddingVector<T>>,
    {
        let mut it = members.into_iter();
        let first = it.next().ok_or(Error::EmptyInput)?;
        let mut acc = first.values.clone();
        for m in it {
            if m.dim() != acc.len() {
                return Err(Error::DimMismatch {
                    left: acc.len(),
                    right: m.dim(),
                });
            }
            for (a, &v) in acc.iter_mut().zip(&m.values) {
                *a += v;
            }
        }
        Self::normalized(acc)
    }
}

impl<T: Scalar> std::ops::Neg for &EmbeddingVector<T> {
    type Output = EmbeddingVector<T>;

    fn neg(self) -> EmbeddingVector<T> {
        EmbeddingVector {
            values: self.values.iter().map(|&v| -v).collect(),
        }
    }
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`. Identical
/// vectors score exactly 1.
pub fn cosine<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.values == b.values {
        return Ok(T::one());
    }
    let dot: T = a.values.iter().zip(&b.values).map(|(&x, &y)| x * y).sum();
    Ok(dot.max(-T::one()).min(T::one()))
}

/// `max(0, cosine)`: the similarity every reward consumes.
pub fn reward_sim<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T> {
    Ok(cosine(a, b)?.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> EmbeddingVector<f64> {
        EmbeddingVector::normalized(x.to_vec()).unwrap()
    }

    #[test]
    fn cosine_basics() {
        let a = v(&[1.0, 2.0, 3.0]);
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
        assert!((cosine(&a, &-&a).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(reward_sim(&a, &-&a).unwrap(), 0.0);
        assert_eq!(
            cosine(&a, &v(&[1.0, 0.0])).unwrap_err().code(),
            "DIM_MISMATCH"
        );
    }

    #[test]
    fn reward_sim_of_constructed_pair() {
        // b = 0.37·e1 + sqrt(1 − 0.37²)·e2 has cosine 0.37 with e1.
        let a = v(&[1.0, 0.0, 0.0]);
        let b = v(&[0.37, (1.0f64 - 0.37 * 0.37).sqrt(), 0.0]);
        assert!((reward_sim(&a, &b).unwrap() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_vectors() {
        assert_eq!(EmbeddingVector::<f64>::normalized(vec![0.0; 4]).unwrap_err().code(), "INVALID_VECTOR");
        assert!(EmbeddingVector::<f64>::normalized(vec![1.0, f64::INFINITY]).is_err());
        assert!(EmbeddingVector::<f64>::normalized(vec![]).is_err());
    }

    #[test]
    fn mean_of_orthogonal_pair() {
        let c = EmbeddingVector::mean_of([&v(&[1.0, 0.0]), &v(&[0.0, 1.0])]).unwrap();
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        assert!((cosine(&c, &v(&[1.0, 0.0])).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let a = EmbeddingVector::<f32>::normalized(vec![3.0, 4.0]).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn normalized_has_unit_norm(xs in proptest::collection::vec(-1e6f64..1e6, 1..64)) {
            prop_assume!(xs.iter().any(|x| x.abs() > 1e-9));
            let e = EmbeddingVector::normalized(xs).unwrap();
            prop_assert!((e.norm() - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn reward_sim_in_unit_interval(
            xs in proptest::collection::vec(-10f64..10.0, 8),
            ys in proptest::collection::vec(-10f64..10.0, 8),
        ) {
            prop_assume!(xs.iter().any(|x| x.abs() > 1e-6) && ys.iter().any(|y| y.abs() > 1e-6));
            let (a, b) = (v(&xs), v(&ys));
            let s = reward_sim(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(cosine(&a, &b).unwrap(), cosine(&b, &a).unwrap());
        }
    }
}
