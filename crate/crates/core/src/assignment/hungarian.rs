//! Rectangular linear assignment via shortest augmenting paths with dual
//! potentials (Kuhn–Munkres, O(n²m)).
//!
//! Generic over the cost type so the solver runs on floats as well as on
//! exact integer or rational costs.

use std::ops::{Add, Sub};

use num_traits::Zero;

/// Numeric requirements of a cost entry.
pub trait Cost: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Zero {}

impl<C> Cost for C where C: Copy + PartialOrd + Add<Output = C> + Sub<Output = C> + Zero {}

/// Dense row-major cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<C> {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl<C: Cost> CostMatrix<C> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C {
        self.data[r * self.cols + c]
    }

    /// Sum of the costs of `pairs`, accumulated in the given order.
    pub fn total(&self, pairs: &[(usize, usize)]) -> C {
        pairs.iter().fold(C::zero(), |acc, &(r, c)| acc + self.get(r, c))
    }
}

/// Minimum-cost assignment of `min(rows, cols)` pairs. Returns `(row, col)`
/// pairs sorted by row. Ties resolve toward lower indices.
pub fn solve<C: Cost>(m: &CostMatrix<C>) -> Vec<(usize, usize)> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    if m.rows <= m.cols {
        solve_wide(m.rows, m.cols, |r, c| m.get(r, c))
    } else {
        let mut pairs: Vec<_> = solve_wide(m.cols, m.rows, |r, c| m.get(c, r))
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}

fn less<C: Cost>(a: C, b: Option<C>) -> bool {
    b.map_or(true, |b| a < b)
}

/// Requires `n <= m`; every row is assigned.
fn solve_wide<C: Cost>(n: usize, m: usize, cost: impl Fn(usize, usize) -> C) -> Vec<(usize, usize)> {
    // 1-based with column 0 as the virtual source.
    let mut u = vec![C::zero(); n + 1];
    let mut v = vec![C::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv: Vec<Option<C>> = vec![None; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta: Option<C> = None;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if less(cur, minv[j]) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].expect("set above");
                if less(mj, delta) {
                    delta = Some(mj);
                    j1 = j;
                }
            }
            let delta = delta.expect("n <= m leaves a free column");
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(mv) = minv[j] {
                    minv[j] = Some(mv - delta);
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}
