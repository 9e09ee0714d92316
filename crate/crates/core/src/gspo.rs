//! Group-normalized advantages and the sequence-level clipped objective.
//!
//! Values only; gradients belong to the trainer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Groups whose reward spread is below this get all-zero advantages.
pub const DEGENERATE_STD: f64 = 1e-8;

pub const DEFAULT_EPSILON: f64 = 3e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Sample<T: Scalar> {
    pub reward: T,
    pub logp_new: Vec<T>,
    pub logp_old: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct PolicyGroup<T: Scalar> {
    pub samples: Vec<Sample<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct GspoResult<T: Scalar> {
    pub advantages: Vec<T>,
    pub ratios: Vec<T>,
    pub objective: T,
    pub clipped_flags: Vec<bool>,
    pub epsilon: T,
}

/// `(r − mean) / std` with the population standard deviation.
pub fn group_advantages<T: Scalar>(rewards: &[T]) -> Result<Vec<T>> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    let n = T::from_usize_lossy(rewards.len());
    let mean = rewards.iter().copied().sum::<T>() / n;
    let var = rewards.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / n;
    let std = var.sqrt();
    if !(std >= T::lit(DEGENERATE_STD)) {
        return Ok(vec![T::zero(); rewards.len()]);
    }
    Ok(rewards.iter().map(|&r| (r - mean) / std).collect())
}

/// Geometric mean of the token ratios, `exp(mean(logp_new − logp_old))`.
pub fn sequence_ratio<T: Scalar>(logp_new: &[T], logp_old: &[T]) -> Result<T> {
    if logp_new.len() != logp_old.len() {
        return Err(Error::LenMismatch {
            new: logp_new.len(),
            old: logp_old.len(),
        });
    }
    if logp_new.is_empty() {
        return Err(Error::EmptySequence);
    }
    let total: T = logp_new.iter().zip(logp_old).map(|(&a, &b)| a - b).sum();
    Ok((total / T::from_usize_lossy(logp_new.len())).exp())
}

pub fn gspo_objective<T: Scalar>(group: &PolicyGroup<T>, epsilon: T) -> Result<GspoResult<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let rewards: Vec<T> = group.samples.iter().map(|s| s.reward).collect();
    let advantages = group_advantages(&rewards)?;
    let ratios = group
        .samples
        .iter()
        .map(|s| sequence_ratio(&s.logp_new, &s.logp_old))
        .collect::<Result<Vec<T>>>()?;

    let (lo, hi) = (T::one() - epsilon, T::one() + epsilon);
    let mut clipped_flags = Vec::with_capacity(ratios.len());
    // Each term is Â·m with m the active multiplier. Since ΣÂ = 0 the sum is
    // accumulated as Σ Â·(m − 1), which is exactly 0 when every m is 1.
    let mut acc = T::zero();
    for (&a, &s) in advantages.iter().zip(&ratios) {
        let c = s.max(lo).min(hi);
        let clipped = c * a < s * a;
        clipped_flags.push(clipped);
        let m = if clipped { c } else { s };
        acc += a * (m - T::one());
    }
    Ok(GspoResult {
        objective: acc / T::from_usize_lossy(ratios.len()),
        advantages,
        ratios,
        clipped_flags,
        epsilon,
    })
}
