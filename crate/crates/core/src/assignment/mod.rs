//! Optimal bipartite matching of predicted to ground-truth objects.
//!
//! The pair cost mixes category similarity, box overlap and normalized
//! corner distance:
//!
//! ```text
//! cost = λ₁·(1 − sim(category)) + λ₂·(1 − IoU) + λ₃·L1
//! ```
//!
//! The full matrix is solved globally, then pairs above `cost_threshold` are
//! released to the unmatched sets.

mod geometry;
pub mod hungarian;

pub use geometry::{iou, l1_norm};
pub use hungarian::{solve, Cost, CostMatrix};

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{reward_sim, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::{canonical_token, ObjectInstance};
use crate::{Embedding, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Weight of the category-dissimilarity term.
    pub lambda1: Real,
    /// Weight of the `1 − IoU` term.
    pub lambda2: Real,
    /// Weight of the normalized L1 term.
    pub lambda3: Real,
    pub cost_threshold: Real,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            cost_threshold: 1.5,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.lambda1, self.lambda2, self.lambda3, self.cost_threshold];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("match weights and threshold must be finite and ≥ 0".into()));
        }
        if self.lambda1 + self.lambda2 + self.lambda3 <= 0.0 {
            return Err(Error::InvalidConfig("match weights must not all be zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub cost: Real,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Sorted by `gt`.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

impl Matching {
    pub fn pred_for_gt(&self, gt: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.gt == gt).map(|p| p.pred)
    }

    pub fn total_cost(&self) -> Real {
        self.pairs.iter().map(|p| p.cost).sum()
    }

    /// Builds the matching implied by solving `costs`, dropping pairs whose
    /// cost exceeds `threshold`.
    pub fn from_costs(costs: &CostMatrix<Real>, threshold: Real) -> Self {
        let mut gt_used = vec![false; costs.rows()];
        let mut pred_used = vec![false; costs.cols()];
        let pairs: Vec<MatchedPair> = solve(costs)
            .into_iter()
            .map(|(gt, pred)| MatchedPair {
                gt,
                pred,
                cost: costs.get(gt, pred),
            })
            .filter(|p| p.cost <= threshold)
            .inspect(|p| {
                gt_used[p.gt] = true;
                pred_used[p.pred] = true;
            })
            .collect();
        let free = |used: &[bool]| (0..used.len()).filter(|&i| !used[i]).collect();
        Self {
            unmatched_gt: free(&gt_used),
            unmatched_pred: free(&pred_used),
            pairs,
        }
    }
}

/// Category embeddings resolved once per scene.
pub struct CategoryTable {
    vectors: HashMap<String, Arc<Embedding>>,
}

impl CategoryTable {
    pub fn resolve<'a>(
        categories: impl IntoIterator<Item = &'a str>,
        store: &EmbeddingStore,
    ) -> Result<Self> {
        let mut keys: Vec<String> = categories.into_iter().map(canonical_token).collect();
        keys.sort();
        keys.dedup();
        let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
        let vecs = store.embed_many(&refs)?;
        Ok(Self {
            vectors: keys.into_iter().zip(vecs).collect(),
        })
    }

    /// Clamped similarity of two category tokens; equal tokens score exactly 1.
    pub fn similarity(&self, a: &str, b: &str) -> Result<Real> {
        let (ka, kb) = (canonical_token(a), canonical_token(b));
        if ka == kb {
            return Ok(1.0);
        }
        let get = |k: &String| self.vectors.get(k).ok_or_else(|| Error::MissingEmbedding(k.clone()));
        reward_sim(get(&ka)?, get(&kb)?)
    }
}

fn pair_cost(
    gt: &ObjectInstance,
    pred: &ObjectInstance,
    category_sim: Real,
    cfg: &MatchConfig,
    width: Real,
    height: Real,
) -> Real {
    cfg.lambda1 * (1.0 - category_sim)
        + cfg.lambda2 * (1.0 - iou(&gt.bbox, &pred.bbox))
        + cfg.lambda3 * l1_norm(&gt.bbox, &pred.bbox, width, height)
}

pub fn match_cost(
    gt: &ObjectInstance,
    pred: &ObjectInstance,
    cfg: &MatchConfig,
    store: &EmbeddingStore,
    width: u32,
    height: u32,
) -> Result<Real> {
    let table = CategoryTable::resolve([gt.category.as_str(), pred.category.as_str()], store)?;
    let sim = table.similarity(&gt.category, &pred.category)?;
    Ok(pair_cost(gt, pred, sim, cfg, width as Real, height as Real))
}

/// Full `|gt| × |pred|` cost matrix.
pub fn cost_matrix(
    gt: &[ObjectInstance],
    pred: &[ObjectInstance],
    cfg: &MatchConfig,
    store: &EmbeddingStore,
    width: u32,
    height: u32,
) -> Result<CostMatrix<Real>> {
    let table = CategoryTable::resolve(
        gt.iter().chain(pred).map(|o| o.category.as_str()),
        store,
    )?;
    let mut sims = Vec::with_capacity(gt.len() * pred.len());
    for g in gt {
        for p in pred {
            sims.push(table.similarity(&g.category, &p.category)?);
        }
    }
    let (w, h) = (width as Real, height as Real);
    Ok(CostMatrix::from_fn(gt.len(), pred.len(), |r, c| {
        pair_cost(&gt[r], &pred[c], sims[r * pred.len() + c], cfg, w, h)
    }))
}

pub fn solve_matching(
    gt: &[ObjectInstance],
    pred: &[ObjectInstance],
    cfg: &MatchConfig,
    store: &EmbeddingStore,
    width: u32,
    height: u32,
) -> Result<Matching> {
    if gt.is_empty() || pred.is_empty() {
        return Ok(Matching {
            pairs: Vec::new(),
            unmatched_gt: (0..gt.len()).collect(),
            unmatched_pred: (0..pred.len()).collect(),
        });
    }
    let costs = cost_matrix(gt, pred, cfg, store, width, height)?;
    Ok(Matching::from_costs(&costs, cfg.cost_threshold))
}
