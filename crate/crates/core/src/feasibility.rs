//! Realizing an allocation matrix as a lottery over slot matchings.
//!
//! The `n × k` matrix is padded with `n − k` dummy "not shown" slots to an `n × n` doubly
//! stochastic matrix, which is then split into permutation matrices (Birkhoff–von Neumann).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::position::AllocationMatrix;
use crate::{Error, CHECK_TOL};

/// Support threshold for the matching graph.
pub const DEFAULT_TOL: f64 = 1e-12;

/// An `n × n` doubly stochastic matrix whose first `shown` columns are real slots.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    n: usize,
    shown: usize,
    entries: Vec<f64>,
}

impl DoublyStochastic {
    /// Validates a square matrix: entries in `[0, 1]` and unit row and column sums, within `tol`.
    pub fn from_rows(rows: &[Vec<f64>], shown: usize, tol: f64) -> Result<Self, Error> {
        let n = rows.len();
        if shown > n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch);
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        if entries.iter().any(|&x| !x.is_finite() || x < -tol || x > 1.0 + tol) {
            return Err(Error::InvalidMatrix);
        }
        let ds = Self { n, shown, entries: entries.into_iter().map(|x| x.max(0.0)).collect() };
        if ds.max_sum_error() > tol {
            return Err(Error::NotSubstochastic);
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real (non-dummy) slots.
    pub fn shown(&self) -> usize {
        self.shown
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    /// Largest deviation of a row or column sum from 1.
    pub fn max_sum_error(&self) -> f64 {
        let n = self.n;
        let mut err = 0.0f64;
        for i in 0..n {
            let r: f64 = (0..n).map(|j| self.get(i, j)).sum();
            let c: f64 = (0..n).map(|j| self.get(j, i)).sum();
            err = err.max((r - 1.0).abs()).max((c - 1.0).abs());
        }
        err
    }
}

/// Pads `alloc` with dummy columns `(1 − Σ_j M_{i,j})/(n − k)`.
pub fn extend_doubly_stochastic(alloc: &AllocationMatrix) -> Result<DoublyStochastic, Error> {
    if !alloc.is_feasible(CHECK_TOL) {
        return Err(Error::NotSubstochastic);
    }
    let (n, k) = (alloc.n(), alloc.k());
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let row = alloc.row(i);
        entries[i * n..i * n + k].copy_from_slice(row);
        if n > k {
            let slack = (1.0 - row.iter().sum::<f64>()).max(0.0) / (n - k) as f64;
            for j in k..n {
                entries[i * n + j] = slack;
            }
        }
    }
    Ok(DoublyStochastic { n, shown: k, entries })
}

/// A convex combination of permutations. `assignments[e][i]` is the column advertiser `i`
/// takes in entry `e`; columns at or past `shown` are dummy slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingDistribution {
    pub n: usize,
    pub shown: usize,
    pub weights: Vec<f64>,
    pub assignments: Vec<Vec<usize>>,
}

impl MatchingDistribution {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Real slot of advertiser `i` in entry `e`, or `None` if not shown.
    pub fn slot_of(&self, e: usize, i: usize) -> Option<usize> {
        let c = self.assignments[e][i];
        (c < self.shown).then_some(c)
    }

    /// `Pr[i → j]` for every advertiser and (real or dummy) column.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (w, perm) in self.weights.iter().zip(&self.assignments) {
            for (i, &c) in perm.iter().enumerate() {
                m[i][c] += w;
            }
        }
        m
    }

    /// Largest entrywise gap between the marginals and `target`.
    pub fn reconstruction_error(&self, target: &DoublyStochastic) -> f64 {
        let m = self.marginals();
        let mut err = 0.0f64;
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                err = err.max((x - target.get(i, j)).abs());
            }
        }
        err
    }

    /// Theoretical cap on the number of permutations, `n² − 2n + 2`.
    pub fn entry_bound(n: usize) -> usize {
        if n == 0 {
            1
        } else {
            n * n + 2 - 2 * n
        }
    }
}

/// Kuhn's augmenting-path matching on a dense bipartite graph.
///
/// Keeps `row_of`/`col_of` from the previous call as a warm start, dropping edges that
/// left the support. Rows and columns are tried in index order, so the result is
/// deterministic.
struct Matcher {
    n: usize,
    col_of: Vec<Option<usize>>,
    row_of: Vec<Option<usize>>,
    seen: Vec<bool>,
}

impl Matcher {
    fn new(n: usize) -> Self {
        Self { n, col_of: vec![None; n], row_of: vec![None; n], seen: vec![false; n] }
    }

    fn augment(&mut self, adj: &dyn Fn(usize, usize) -> bool, r: usize) -> bool {
        // a free neighbour first, then the first augmenting path
        if let Some(c) = (0..self.n).find(|&c| adj(r, c) && self.row_of[c].is_none()) {
            self.row_of[c] = Some(r);
            self.col_of[r] = Some(c);
            return true;
        }
        for c in 0..self.n {
            if !adj(r, c) || self.seen[c] {
                continue;
            }
            self.seen[c] = true;
            let free = match self.row_of[c] {
                None => true,
                Some(r2) => self.augment(adj, r2),
            };
            if free {
                self.row_of[c] = Some(r);
                self.col_of[r] = Some(c);
                return true;
            }
        }
        false
    }

    fn perfect(&mut self, adj: &dyn Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
        for r in 0..self.n {
            if let Some(c) = self.col_of[r] {
                if !adj(r, c) {
                    self.col_of[r] = None;
                    self.row_of[c] = None;
                }
            }
        }
        for r in 0..self.n {
            if self.col_of[r].is_none() {
                self.seen.iter_mut().for_each(|s| *s = false);
                if !self.augment(adj, r) {
                    return None;
                }
            }
        }
        self.col_of.iter().map(|c| *c).collect()
    }
}

/// Birkhoff–von Neumann decomposition.
///
/// Entries at most `tol` are outside the support. The loop stops once the undecomposed
/// mass is at most `n·tol`; if the support loses its perfect matching with at most
/// `n²·tol` left, the remainder is treated as rounding dust. Weights are renormalized to
/// sum to 1.
pub fn bvn_decompose(ds: &DoublyStochastic, tol: f64) -> Result<MatchingDistribution, Error> {
    let n = ds.n;
    let mut rest = ds.entries.clone();
    let mut weights = Vec::new();
    let mut assignments = Vec::new();
    let mut remaining = 1.0f64;
    let mut matcher = Matcher::new(n);
    if n == 0 {
        return Ok(MatchingDistribution { n, shown: ds.shown, weights, assignments });
    }
    while remaining > n as f64 * tol {
        let support = |r: usize, c: usize| rest[r * n + c] > tol;
        let Some(perm) = matcher.perfect(&support) else {
            if remaining <= (n * n) as f64 * tol {
                break;
            }
            return Err(Error::NoPerfectMatching { remaining_mass: remaining });
        };
        let (arg, w) = perm
            .iter()
            .enumerate()
            .map(|(r, &c)| (r * n + c, rest[r * n + c]))
            .fold((0, f64::INFINITY), |best, x| if x.1 < best.1 { x } else { best });
        for (r, &c) in perm.iter().enumerate() {
            rest[r * n + c] -= w;
        }
        rest[arg] = 0.0;
        remaining -= w;
        weights.push(w);
        assignments.push(perm);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoPerfectMatching { remaining_mass: remaining });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(MatchingDistribution { n, shown: ds.shown, weights, assignments })
}

/// Draws one matching; the same seed always gives the same result.
pub fn sample_matching(dist: &MatchingDistribution, seed: u64) -> &[usize] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (w, a) in dist.weights.iter().zip(&dist.assignments) {
        acc += w;
        if u < acc {
            return a;
        }
    }
    dist.assignments.last().expect("distribution has at least one entry")
}
