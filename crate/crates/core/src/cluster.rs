//! Density clustering of triplet embeddings into semantic prototypes.
//!
//! Distance is cosine distance `1 − cos(a, b)` on unit vectors. Noise points
//! are promoted to singleton clusters, so every input belongs to exactly one
//! prototype.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, reward_sim, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanParams<T: Scalar> {
    /// Neighborhood radius in cosine distance, inclusive.
    pub eps: T,
    /// Neighbors (self included) needed for a core point.
    pub min_pts: usize,
}

impl<T: Scalar> Default for DbscanParams<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(0.15),
            min_pts: 2,
        }
    }
}

impl<T: Scalar> DbscanParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > T::zero() && self.eps < T::lit(2.0)) {
            return Err(Error::InvalidConfig(format!("dbscan eps {} outside (0, 2)", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidConfig("dbscan min_pts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Cluster(usize),
    Noise,
}

pub fn cosine_distance<T: Scalar>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T> {
    Ok(T::one() - cosine(a, b)?)
}

/// DBSCAN with deterministic index-order expansion. Clusters are numbered
/// in order of discovery; a border point reachable from several clusters
/// joins the first one to reach it.
pub fn dbscan<T: Scalar>(points: &[EmbeddingVector<T>], params: &DbscanParams<T>) -> Result<Vec<Label>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    params.validate()?;
    let n = points.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        neighbors[i].push(i);
        for j in i + 1..n {
            if cosine_distance(&points[i], &points[j])? <= params.eps {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if labels[seed].is_some() {
            continue;
        }
        if !is_core[seed] {
            labels[seed] = Some(Label::Noise);
            continue;
        }
        let id = next;
        next += 1;
        labels[seed] = Some(Label::Cluster(id));
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            if !is_core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                match labels[q] {
                    None => {
                        labels[q] = Some(Label::Cluster(id));
                        queue.push_back(q);
                    }
                    Some(Label::Noise) => labels[q] = Some(Label::Cluster(id)),
                    Some(Label::Cluster(_)) => {}
                }
            }
        }
    }
    Ok(labels.into_iter().map(|l| l.expect("every point labeled")).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prototype<T: Scalar> {
    /// Sorted input indices.
    pub members: Vec<usize>,
    pub centroid: EmbeddingVector<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSet<T: Scalar> {
    /// Ordered by smallest member index.
    pub clusters: Vec<Prototype<T>>,
    /// Input index → cluster id.
    pub assignment: Vec<usize>,
}

impl<T: Scalar> ClusterSet<T> {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

pub fn build_prototypes<T: Scalar>(
    points: &[EmbeddingVector<T>],
    params: &DbscanParams<T>,
) -> Result<ClusterSet<T>> {
    let labels = dbscan(points, params)?;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut by_label = std::collections::HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Noise => groups.push(vec![i]),
            Label::Cluster(c) => {
                let slot = *by_label.entry(*c).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[slot].push(i);
            }
        }
    }
    // Groups are created in order of their first member, so ids follow
    // smallest member index.
    let mut assignment = vec![0; points.len()];
    let mut clusters = Vec::with_capacity(groups.len());
    for (id, members) in groups.into_iter().enumerate() {
        for &m in &members {
            assignment[m] = id;
        }
        let centroid = EmbeddingVector::mean_of(members.iter().map(|&m| &points[m]))?;
        clusters.push(Prototype { members, centroid });
    }
    Ok(ClusterSet { clusters, assignment })
}

/// Best cluster by clamped similarity to its centroid, if at least `tau`.
/// Ties go to the lowest cluster id.
pub fn assign_prediction<T: Scalar>(
    pred: &EmbeddingVector<T>,
    clusters: &ClusterSet<T>,
    tau: T,
) -> Result<Option<usize>> {
    let mut best: Option<(usize, T)> = None;
    for (id, c) in clusters.clusters.iter().enumerate() {
        let s = reward_sim(pred, &c.centroid)?;
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    Ok(best.filter(|&(_, s)| s >= tau).map(|(id, _)| id))
}
