//! Straight-line reference implementations, written from the formulas
//! without reusing any library algorithm: exhaustive matching, a textbook
//! region-query DBSCAN, linear-scan greedy consumption, direct GSPO.
//!
//! Library types appear only as plain data carriers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use sgr::graph::ProfileSpec;
use sgr::reward::RewardConfig;
use sgr::SceneGraph;

/// Unit vectors by key, normalized here from the raw table.
pub struct Vectors {
    map: HashMap<String, Vec<f64>>,
}

impl Vectors {
    pub fn new(entries: &[(String, Vec<f64>)]) -> Self {
        let map = entries
            .iter()
            .map(|(k, v)| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                (k.clone(), v.iter().map(|x| x / n).collect())
            })
            .collect();
        Self { map }
    }

    pub fn get(&self, key: &str) -> &[f64] {
        self.map.get(key).unwrap_or_else(|| panic!("no vector for `{key}`"))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn clamped(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        1.0
    } else {
        dot(a, b).max(0.0)
    }
}

pub fn f1(pred: &BTreeSet<String>, gt: &BTreeSet<String>) -> f64 {
    if pred.is_empty() && gt.is_empty() {
        return 1.0;
    }
    let tp = pred.iter().filter(|c| gt.contains(*c)).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / pred.len() as f64;
    let r = tp / gt.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn box_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn box_l1(a: [f64; 4], b: [f64; 4], w: f64, h: f64) -> f64 {
    (a[0] - b[0]).abs() / w + (a[2] - b[2]).abs() / w + (a[1] - b[1]).abs() / h + (a[3] - b[3]).abs() / h
}

/// Every injection of `0..small` into `0..large`, lexicographic.
pub fn injections(small: usize, large: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut used = vec![false; large];
    fn go(small: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == small {
            out.push(cur.clone());
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                go(small, used, cur, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    go(small, &mut used, &mut cur, &mut out);
    out
}

/// Minimum total over all maximal one-to-one assignments of a dense
/// `rows × cols` matrix, with the pairs `(row, col)` attaining it.
pub fn brute_force_assignment<C>(cost: &[Vec<C>]) -> (C, Vec<(usize, usize)>)
where
    C: Copy + PartialOrd + std::ops::Add<Output = C> + Default,
{
    let rows = cost.len();
    let cols = if rows == 0 { 0 } else { cost[0].len() };
    let transpose = rows > cols;
    let (small, large) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut best: Option<(C, Vec<(usize, usize)>)> = None;
    for inj in injections(small, large) {
        let mut pairs: Vec<(usize, usize)> = inj
            .iter()
            .enumerate()
            .map(|(i, &j)| if transpose { (j, i) } else { (i, j) })
            .collect();
        pairs.sort();
        let mut total = C::default();
        for &(r, c) in &pairs {
            total = total + cost[r][c];
        }
        if best.as_ref().map_or(true, |(b, _)| total < *b) {
            best = Some((total, pairs));
        }
    }
    best.unwrap_or((C::default(), Vec::new()))
}

/// Textbook DBSCAN: visit points in index order, expand each new cluster
/// through a growing seed list with a fresh region query per core point.
/// Returns `Some(cluster)` or `None` for noise.
pub fn naive_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let region = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| j == i || 1.0 - clamped_cos(&points[i], &points[j]) <= eps)
            .collect()
    };
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        Noise,
        In(usize),
    }
    let mut marks = vec![Mark::Unvisited; n];
    let mut next = 0;
    for i in 0..n {
        if marks[i] != Mark::Unvisited {
            continue;
        }
        let nb = region(i);
        if nb.len() < min_pts {
            marks[i] = Mark::Noise;
            continue;
        }
        let c = next;
        next += 1;
        marks[i] = Mark::In(c);
        let mut seeds: Vec<usize> = nb;
        let mut k = 0;
        while k < seeds.len() {
            let q = seeds[k];
            k += 1;
            match marks[q] {
                Mark::Noise => marks[q] = Mark::In(c),
                Mark::Unvisited => {
                    marks[q] = Mark::In(c);
                    let qn = region(q);
                    if qn.len() >= min_pts {
                        seeds.extend(qn);
                    }
                }
                Mark::In(_) => {}
            }
        }
    }
    marks
        .into_iter()
        .map(|m| match m {
            Mark::In(c) => Some(c),
            _ => None,
        })
        .collect()
}

/// Raw cosine, with identical vectors at exactly 1.
fn clamped_cos(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        1.0
    } else {
        dot(a, b)
    }
}

/// Labels rewritten so cluster ids follow first appearance; noise stays
/// distinct. Two labelings describe the same partition iff their canonical
/// forms are equal.
pub fn canonical_labels(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| {
                let k = map.len();
                *map.entry(c).or_insert(k)
            })
        })
        .collect()
}

/// Component values from the reference.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Components {
    pub format: f64,
    pub category: f64,
    pub box_reward: f64,
    pub recall: f64,
    pub fine: f64,
    pub coarse: f64,
    pub composite: f64,
}

pub struct Reference<'a> {
    pub vectors: &'a Vectors,
    pub spec: &'a ProfileSpec,
    pub cfg: &'a RewardConfig,
}

fn bx(b: &sgr::BoundingBox) -> [f64; 4] {
    [b.x1, b.y1, b.x2, b.y2]
}

impl Reference<'_> {
    fn cat_sim(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        clamped(self.vectors.get(&a.to_lowercase()), self.vectors.get(&b.to_lowercase()))
    }

    fn triplet_vec(&self, s: &str, p: &str, o: &str) -> &[f64] {
        self.vectors.get(&format!("{s} {p} {o}").to_lowercase())
    }

    /// Normalized, smoothed frequency of every predicate.
    fn frequencies(&self) -> BTreeMap<String, f64> {
        let all: Vec<&String> = self.spec.taxonomy.iter().flat_map(|g| &g.predicates).collect();
        let total: f64 = self.spec.predicate_freq.values().sum();
        let observed: Vec<(&String, f64)> = self
            .spec
            .predicate_freq
            .iter()
            .filter(|(_, v)| **v > 0.0)
            .map(|(k, v)| (k, v / total))
            .collect();
        if observed.is_empty() {
            return all.into_iter().map(|p| (p.clone(), 1.0 / self.spec.taxonomy.iter().map(|g| g.predicates.len()).sum::<usize>() as f64)).collect();
        }
        let mut f_min = f64::INFINITY;
        for (_, f) in &observed {
            f_min = f_min.min(*f);
        }
        all.into_iter()
            .map(|p| {
                let f = observed.iter().find(|(k, _)| *k == p).map_or(f_min, |(_, f)| *f);
                (p.clone(), f)
            })
            .collect()
    }

    pub fn weight(&self, predicate: &str) -> f64 {
        let freq = self.frequencies();
        let f_max = freq.values().cloned().fold(f64::MIN, f64::max);
        let f_min = freq.values().cloned().fold(f64::MAX, f64::min);
        let f = freq[predicate];
        let alpha = if f_max == f_min { 0.0 } else { (f_max / f).ln() / (f_max / f_min).ln() };
        self.cfg.w_base + self.cfg.w_inc * alpha.clamp(0.0, 1.0)
    }

    /// `(gt index, pred index)` pairs kept after the cost threshold.
    pub fn matching(&self, gt: &SceneGraph, pred: &SceneGraph) -> Vec<(usize, usize)> {
        if gt.objects.is_empty() || pred.objects.is_empty() {
            return Vec::new();
        }
        let m = &self.cfg.matching;
        let (w, h) = (gt.width as f64, gt.height as f64);
        let cost: Vec<Vec<f64>> = gt
            .objects
            .iter()
            .map(|g| {
                pred.objects
                    .iter()
                    .map(|p| {
                        m.lambda1 * (1.0 - self.cat_sim(&g.category, &p.category))
                            + m.lambda2 * (1.0 - box_iou(bx(&g.bbox), bx(&p.bbox)))
                            + m.lambda3 * box_l1(bx(&g.bbox), bx(&p.bbox), w, h)
                    })
                    .collect()
            })
            .collect();
        let (_, pairs) = brute_force_assignment(&cost);
        pairs.into_iter().filter(|&(r, c)| cost[r][c] <= m.cost_threshold).collect()
    }

    pub fn node(&self, gt: &SceneGraph, pred: &SceneGraph, pairs: &[(usize, usize)]) -> (f64, f64) {
        if gt.objects.is_empty() {
            let v = if pred.objects.is_empty() { 1.0 } else { 0.0 };
            return (v, v);
        }
        let (w, h) = (gt.width as f64, gt.height as f64);
        let mut b = 0.0;
        let mut r = 0.0;
        for &(gi, pi) in pairs {
            let (g, p) = (&gt.objects[gi], &pred.objects[pi]);
            let iou = box_iou(bx(&g.bbox), bx(&p.bbox));
            b += 0.5 * iou + 0.5 * (1.0 - box_l1(bx(&g.bbox), bx(&p.bbox), w, h)).max(0.0);
            let overlap = iou > 0.5;
            let same = g.category == p.category;
            r += if overlap && same {
                1.0
            } else if overlap != same {
                0.5
            } else {
                0.0
            };
        }
        let n = gt.objects.len() as f64;
        (b / n, r / n)
    }

    pub fn fine(&self, gt: &SceneGraph, pred: &SceneGraph, pairs: &[(usize, usize)]) -> f64 {
        if gt.relations.is_empty() {
            return if pred.relations.is_empty() { 1.0 } else { 0.0 };
        }
        let gpos = |k: &sgr::graph::InstanceKey| gt.objects.iter().position(|o| &o.key == k).unwrap();
        let ppos = |k: &sgr::graph::InstanceKey| pred.objects.iter().position(|o| &o.key == k).unwrap();
        let mapped = |gi: usize| pairs.iter().find(|(g, _)| *g == gi).map(|(_, p)| *p);
        // sim[j][i] for GT relation j and candidate prediction i.
        let mut sim: Vec<Vec<Option<f64>>> = vec![vec![None; pred.relations.len()]; gt.relations.len()];
        for (j, t) in gt.relations.iter().enumerate() {
            let (Some(ms), Some(mo)) = (mapped(gpos(&t.subject)), mapped(gpos(&t.object))) else { continue };
            for (i, q) in pred.relations.iter().enumerate() {
                if ppos(&q.subject) == ms && ppos(&q.object) == mo {
                    let a = self.triplet_vec(&t.subject.category, &t.predicate, &t.object.category);
                    let b = self.triplet_vec(&q.subject.category, &q.predicate, &q.object.category);
                    let pa = self.vectors.get(&t.predicate.to_lowercase());
                    let pb = self.vectors.get(&q.predicate.to_lowercase());
                    sim[j][i] = Some(clamped(a, b) * clamped(pa, pb));
                }
            }
        }
        let mut best = vec![0.0; gt.relations.len()];
        let mut gt_done = vec![false; gt.relations.len()];
        let mut used = vec![false; pred.relations.len()];
        loop {
            let mut pick: Option<(f64, usize, usize)> = None;
            for j in 0..gt.relations.len() {
                for i in 0..pred.relations.len() {
                    if gt_done[j] || used[i] {
                        continue;
                    }
                    if let Some(s) = sim[j][i] {
                        if pick.map_or(true, |(b, _, _)| s > b) {
                            pick = Some((s, j, i));
                        }
                    }
                }
            }
            let Some((s, j, i)) = pick else { break };
            best[j] = s;
            gt_done[j] = true;
            used[i] = true;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, t) in gt.relations.iter().enumerate() {
            let w = self.weight(&t.predicate);
            num += best[j] * w;
            den += w;
        }
        (num / den).clamp(0.0, 1.0)
    }

    pub fn coarse(&self, gt: &SceneGraph, pred: &SceneGraph) -> f64 {
        if gt.relations.is_empty() {
            return if pred.relations.is_empty() { 1.0 } else { 0.0 };
        }
        let points: Vec<Vec<f64>> = gt
            .relations
            .iter()
            .map(|t| self.triplet_vec(&t.subject.category, &t.predicate, &t.object.category).to_vec())
            .collect();
        let labels = naive_dbscan(&points, self.cfg.dbscan.eps, self.cfg.dbscan.min_pts);
        // Clusters ordered by smallest member; noise points stand alone.
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for i in 0..points.len() {
            match labels[i] {
                None => clusters.push(vec![i]),
                Some(c) => {
                    if let Some(cl) = clusters.iter_mut().find(|cl| labels[cl[0]] == Some(c)) {
                        cl.push(i);
                    } else {
                        clusters.push(vec![i]);
                    }
                }
            }
        }
        let centroids: Vec<Vec<f64>> = clusters
            .iter()
            .map(|cl| {
                let mut m = vec![0.0; points[0].len()];
                for &i in cl {
                    for d in 0..m.len() {
                        m[d] += points[i][d];
                    }
                }
                let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
                m.iter().map(|x| x / n).collect()
            })
            .collect();
        let tau = self.cfg.tau;
        let mut covered = vec![false; clusters.len()];
        let mut hits = vec![0usize; clusters.len()];
        for q in &pred.relations {
            let v = self.triplet_vec(&q.subject.category, &q.predicate, &q.object.category);
            let sims: Vec<f64> = centroids.iter().map(|c| clamped(v, c)).collect();
            for (c, s) in sims.iter().enumerate() {
                if *s >= tau {
                    covered[c] = true;
                }
            }
            let mut arg = 0;
            for c in 1..sims.len() {
                if sims[c] > sims[arg] {
                    arg = c;
                }
            }
            if sims[arg] >= tau {
                hits[arg] += 1;
            }
        }
        let n_cov = covered.iter().filter(|c| **c).count();
        if n_cov == 0 {
            return 0.0;
        }
        let mut num = 0;
        let mut den = 0;
        for c in 0..clusters.len() {
            if covered[c] {
                num += hits[c];
                den += clusters[c].len();
            }
        }
        let rho = (num as f64 / den as f64).min(1.0);
        n_cov as f64 / clusters.len() as f64 * rho
    }

    /// Every component for a prediction, given its stage validity and
    /// category stage (`None` when no graph was assembled).
    pub fn score(&self, gt: &SceneGraph, valid_stages: usize, pred: Option<(&[String], &SceneGraph)>) -> Components {
        let w = &self.cfg.composite_weights;
        let format = valid_stages as f64 / 3.0;
        let Some((cats, pred)) = pred else {
            return Components {
                format,
                composite: (w.format * format).clamp(0.0, 1.0),
                ..Default::default()
            };
        };
        let pc: BTreeSet<String> = cats.iter().cloned().collect();
        let gc: BTreeSet<String> = gt.objects.iter().map(|o| o.category.clone()).collect();
        let category = f1(&pc, &gc);
        let pairs = self.matching(gt, pred);
        let (box_reward, recall) = self.node(gt, pred, &pairs);
        let fine = self.fine(gt, pred, &pairs);
        let coarse = self.coarse(gt, pred);
        let nb = self.cfg.node_box_share;
        let rf = self.cfg.relation_fine_share;
        let composite = w.format * format
            + w.category * category
            + w.node * (nb * box_reward + (1.0 - nb) * recall)
            + w.relation * (rf * fine + (1.0 - rf) * coarse);
        Components {
            format,
            category,
            box_reward,
            recall,
            fine,
            coarse,
            composite: composite.clamp(0.0, 1.0),
        }
    }
}

/// Population-std standardization with the degenerate-group rule.
pub fn advantages(rewards: &[f64]) -> Vec<f64> {
    let g = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / g;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g;
    if var.sqrt() < 1e-8 {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - mean) / var.sqrt()).collect()
}

/// `(1/G) Σ min(s·A, clip(s, 1−ε, 1+ε)·A)` evaluated term by term.
pub fn gspo_objective(rewards: &[f64], logp_new: &[Vec<f64>], logp_old: &[Vec<f64>], eps: f64) -> (Vec<f64>, f64) {
    let adv = advantages(rewards);
    let mut ratios = Vec::new();
    let mut total = 0.0;
    for i in 0..rewards.len() {
        let len = logp_new[i].len() as f64;
        let mut d = 0.0;
        for t in 0..logp_new[i].len() {
            d += logp_new[i][t] - logp_old[i][t];
        }
        let s = (d / len).exp();
        let clipped = s.max(1.0 - eps).min(1.0 + eps);
        total += (s * adv[i]).min(clipped * adv[i]);
        ratios.push(s);
    }
    (ratios, total / rewards.len() as f64)
}
