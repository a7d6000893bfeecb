//! Slot-allocation matrices from telescoping k-unit allocations.
//!
//! Column `j` of the matrix is `a^{(j)} − a^{(j−1)}` where `a^{(h)}` is the h-unit
//! allocation. Slot CTRs play no part here.

use alloc::vec;
use alloc::vec::Vec;

use crate::instance::{AuctionInstance, Family, MechanismConfig};
use crate::kunit::kunit;
use crate::Error;

/// Differences above this magnitude below zero are a hard error rather than rounding noise.
pub const CLAMP_TOL: f64 = 1e-12;

/// An `n × k` matrix of display probabilities, advertisers by slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    n: usize,
    k: usize,
    entries: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    min_raw_entry: f64,
}

impl AllocationMatrix {
    /// Builds the matrix from `a^{(0)}, …, a^{(k)}` (`a^{(0)}` must be zero).
    pub fn from_cumulative(cumulative: Vec<Vec<f64>>) -> Result<Self, Error> {
        let k = cumulative.len().checked_sub(1).ok_or(Error::InvalidMatrix)?;
        let n = cumulative[0].len();
        if cumulative.iter().any(|c| c.len() != n) || cumulative[0].iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidMatrix);
        }
        let mut entries = vec![0.0; n * k];
        let mut min_raw_entry = f64::INFINITY;
        for j in 0..k {
            let mut clamped = false;
            for i in 0..n {
                let d = cumulative[j + 1][i] - cumulative[j][i];
                if !d.is_finite() {
                    return Err(Error::InvalidMatrix);
                }
                min_raw_entry = min_raw_entry.min(d);
                if d < -CLAMP_TOL {
                    return Err(Error::NegativeSlotProbability { advertiser: i, slot: j, value: d });
                }
                if d < 0.0 {
                    clamped = true;
                }
                entries[i * k + j] = d.max(0.0);
            }
            if clamped {
                let s: f64 = (0..n).map(|i| entries[i * k + j]).sum();
                if s > 0.0 {
                    for i in 0..n {
                        entries[i * k + j] /= s;
                    }
                }
            }
        }
        Ok(Self { n, k, entries, cumulative, min_raw_entry })
    }

    /// Builds the matrix from rows, checking it is doubly substochastic within `tol`
    /// with unit column sums.
    pub fn from_rows(rows: &[Vec<f64>], k: usize, tol: f64) -> Result<Self, Error> {
        let n = rows.len();
        if n < k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch);
        }
        let mut cumulative = vec![vec![0.0; n]; k + 1];
        let mut min_raw_entry = f64::INFINITY;
        for (i, row) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidMatrix);
                }
                if x < -tol {
                    return Err(Error::NegativeSlotProbability { advertiser: i, slot: j, value: x });
                }
                min_raw_entry = min_raw_entry.min(x);
                acc += x;
                cumulative[j + 1][i] = acc;
            }
            if acc > 1.0 + tol {
                return Err(Error::NotSubstochastic);
            }
        }
        for j in 0..k {
            let s: f64 = rows.iter().map(|r| r[j]).sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::NotSubstochastic);
            }
        }
        let entries = rows.iter().flat_map(|r| r.iter().map(|&x| x.max(0.0))).collect();
        Ok(Self { n, k, entries, cumulative, min_raw_entry })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// `a^{(h)}` for `h = 0..=k`.
    pub fn cumulative(&self) -> &[Vec<f64>] {
        &self.cumulative
    }

    /// Smallest column difference before clamping (`+∞` when `k = 0`).
    pub fn min_raw_entry(&self) -> f64 {
        self.min_raw_entry
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.k).map(|j| (0..self.n).map(|i| self.get(i, j)).sum()).collect()
    }

    /// Non-negative entries, unit column sums and row sums at most 1, all within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.entries.iter().all(|&x| x >= 0.0 && x <= 1.0 + tol)
            && self.column_sums().iter().all(|s| (s - 1.0).abs() <= tol)
            && self.row_sums().iter().all(|&s| s <= 1.0 + tol)
    }
}

fn telescope(family: Family, inst: &AuctionInstance, ell: f64) -> Result<AllocationMatrix, Error> {
    let vhat = inst.effective_values();
    let mut cumulative = Vec::with_capacity(inst.k() + 1);
    cumulative.push(vec![0.0; inst.n()]);
    for h in 1..=inst.k() {
        cumulative.push(kunit(family, &vhat, h, ell)?.a);
    }
    AllocationMatrix::from_cumulative(cumulative)
}

/// Generalized IPA.
pub fn generalized_ipa(inst: &AuctionInstance, ell: f64) -> Result<AllocationMatrix, Error> {
    telescope(Family::Ipa, inst, ell)
}

/// Generalized PA.
pub fn generalized_pa(inst: &AuctionInstance, ell: f64) -> Result<AllocationMatrix, Error> {
    telescope(Family::Pa, inst, ell)
}

pub fn generalized(inst: &AuctionInstance, config: &MechanismConfig) -> Result<AllocationMatrix, Error> {
    telescope(config.family, inst, config.ell)
}

/// The matrix of the welfare-optimal assignment: advertisers sorted by `v̂` (ties by index)
/// fill slots in order.
pub fn unfair_opt_matrix(inst: &AuctionInstance) -> AllocationMatrix {
    let vhat = inst.effective_values();
    let (n, k) = (inst.n(), inst.k());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vhat[b].total_cmp(&vhat[a]).then(a.cmp(&b)));
    let mut cumulative = vec![vec![0.0; n]; k + 1];
    for h in 1..=k {
        cumulative[h] = cumulative[h - 1].clone();
        cumulative[h][order[h - 1]] = 1.0;
    }
    AllocationMatrix::from_cumulative(cumulative).expect("0/1 cumulative vectors are monotone")
}
