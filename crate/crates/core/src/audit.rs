//! Measured stability deviations against their theoretical bounds.
//!
//! Every audit takes `λ` as an argument; callers pick effective or raw values as the
//! definition requires.

use alloc::vec;
use alloc::vec::Vec;

use crate::instance::{lambda_of, stability_bound, tv_stability_bound, AuctionInstance, MechanismConfig};
use crate::position::{generalized, AllocationMatrix};
use crate::Error;

/// Slack allowed when deciding `satisfied`.
pub const AUDIT_TOL: f64 = 1e-9;

/// Relative tolerance for treating two CTR ratios `α/α′` as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// `max_{i,j} |M_{i,j} − M′_{i,j}|` against `2f`.
    Weak,
    /// `|Σ_j h_j (M_{i,j} − M′_{i,j})|` against `f`.
    Ordered,
    /// Per-column subset deviation against `2f`.
    TotalVariation,
    /// Subset deviation of k-unit vectors against `(λ^ℓ−1)/(λ^ℓ+1)`.
    KUnitTotalVariation,
    /// `max_i |a_i − a′_i|` of k-unit vectors against `f`.
    KUnit,
    /// Prefix dominance under the `α/α′` ordering, normalized by prefix length, against `f`.
    Heterogeneous,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Weak => "weak",
            Metric::Ordered => "ordered",
            Metric::TotalVariation => "tv",
            Metric::KUnitTotalVariation => "kunit_tv",
            Metric::KUnit => "kunit",
            Metric::Heterogeneous => "hetero",
        }
    }
}

/// Indices that achieve the measured deviation.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Nothing to compare (`k = 0` or empty vectors).
    None,
    Entry { advertiser: usize, slot: usize },
    /// Prefix `h = (1,…,1,0,…,0)` with `slots` ones.
    Prefix { advertiser: usize, slots: usize },
    Weighted { advertiser: usize, h: Vec<f64> },
    /// Advertisers whose difference has the given sign in `column` (`None` for vectors).
    Subset { column: Option<usize>, members: Vec<usize>, positive: bool },
    /// First `prefix` advertisers of `order` over the first `slots` columns.
    HeteroPrefix { prefix: usize, slots: usize, order: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub metric: Metric,
    pub measured: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub witness: Witness,
}

impl AuditRecord {
    fn new(metric: Metric, measured: f64, bound: f64, witness: Witness) -> Self {
        Self { metric, measured, bound, satisfied: measured <= bound + AUDIT_TOL, witness }
    }

    /// Slack `bound − measured`; negative on a violation.
    pub fn margin(&self) -> f64 {
        self.bound - self.measured
    }
}

fn same_shape(m: &AllocationMatrix, m2: &AllocationMatrix) -> Result<(), Error> {
    if m.n() != m2.n() || m.k() != m2.k() {
        return Err(Error::DimensionMismatch);
    }
    Ok(())
}

/// Weak value stability: every entry moves by at most `2 f_ℓ(λ)`.
pub fn weak_vs_audit(m: &AllocationMatrix, m2: &AllocationMatrix, lambda: f64, ell: f64) -> Result<AuditRecord, Error> {
    same_shape(m, m2)?;
    let mut best = (0.0, Witness::None);
    for i in 0..m.n() {
        for j in 0..m.k() {
            let d = (m.get(i, j) - m2.get(i, j)).abs();
            if d > best.0 || best.1 == Witness::None {
                best = (d, Witness::Entry { advertiser: i, slot: j });
            }
        }
    }
    Ok(AuditRecord::new(Metric::Weak, best.0, 2.0 * stability_bound(lambda, ell)?, best.1))
}

/// Weight vector for the ordered audit.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderedWeights {
    Explicit(Vec<f64>),
    /// The worst prefix indicator, which dominates every admissible `h`.
    Worst,
}

fn check_h(h: &[f64], k: usize) -> Result<(), Error> {
    if h.len() != k || h.iter().any(|x| !(0.0..=1.0).contains(x)) || h.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidH);
    }
    Ok(())
}

/// Ordered value stability for advertiser `i`.
pub fn ordered_vs_audit(
    m: &AllocationMatrix,
    m2: &AllocationMatrix,
    i: usize,
    h: &OrderedWeights,
    lambda: f64,
    ell: f64,
) -> Result<AuditRecord, Error> {
    same_shape(m, m2)?;
    if i >= m.n() {
        return Err(Error::AdvertiserOutOfRange { advertiser: i, n: m.n() });
    }
    let bound = stability_bound(lambda, ell)?;
    let (measured, witness) = match h {
        OrderedWeights::Explicit(h) => {
            check_h(h, m.k())?;
            let s: f64 = (0..m.k()).map(|j| h[j] * (m.get(i, j) - m2.get(i, j))).sum();
            (s.abs(), Witness::Weighted { advertiser: i, h: h.clone() })
        }
        OrderedWeights::Worst => worst_prefix(m, m2, i),
    };
    Ok(AuditRecord::new(Metric::Ordered, measured, bound, witness))
}

fn worst_prefix(m: &AllocationMatrix, m2: &AllocationMatrix, i: usize) -> (f64, Witness) {
    let mut best = (0.0, Witness::None);
    for p in 1..=m.k() {
        let d = (m.cumulative()[p][i] - m2.cumulative()[p][i]).abs();
        if d > best.0 || best.1 == Witness::None {
            best = (d, Witness::Prefix { advertiser: i, slots: p });
        }
    }
    best
}

/// Worst prefix deviation over all advertisers.
pub fn ordered_vs_audit_all(m: &AllocationMatrix, m2: &AllocationMatrix, lambda: f64, ell: f64) -> Result<AuditRecord, Error> {
    same_shape(m, m2)?;
    let mut best = (0.0, Witness::None);
    for i in 0..m.n() {
        let (d, w) = worst_prefix(m, m2, i);
        if d > best.0 || best.1 == Witness::None {
            best = (d, w);
        }
    }
    Ok(AuditRecord::new(Metric::Ordered, best.0, stability_bound(lambda, ell)?, best.1))
}

/// `max_S |Σ_{s∈S} d_s|`, realized by the positive or the negative part.
fn subset_deviation(d: &[f64]) -> (f64, Vec<usize>, bool) {
    let pos: f64 = d.iter().filter(|&&x| x > 0.0).sum();
    let neg: f64 = -d.iter().filter(|&&x| x < 0.0).sum::<f64>();
    let positive = pos >= neg;
    let members = (0..d.len()).filter(|&s| if positive { d[s] > 0.0 } else { d[s] < 0.0 }).collect();
    (pos.max(neg), members, positive)
}

/// Total-variation stability, one record per column, against `2 f_ℓ(λ)`.
pub fn tv_vs_audit(m: &AllocationMatrix, m2: &AllocationMatrix, lambda: f64, ell: f64) -> Result<Vec<AuditRecord>, Error> {
    same_shape(m, m2)?;
    let bound = 2.0 * stability_bound(lambda, ell)?;
    Ok((0..m.k())
        .map(|j| {
            let d: Vec<f64> = (0..m.n()).map(|i| m.get(i, j) - m2.get(i, j)).collect();
            let (measured, members, positive) = subset_deviation(&d);
            AuditRecord::new(Metric::TotalVariation, measured, bound, Witness::Subset { column: Some(j), members, positive })
        })
        .collect())
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), Error> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

/// Subset deviation of two k-unit allocations against `(λ^ℓ−1)/(λ^ℓ+1)`.
pub fn kunit_tv_audit(a: &[f64], a2: &[f64], lambda: f64, ell: f64) -> Result<AuditRecord, Error> {
    same_len(a, a2)?;
    let d: Vec<f64> = a.iter().zip(a2).map(|(x, y)| x - y).collect();
    let (measured, members, positive) = subset_deviation(&d);
    let bound = tv_stability_bound(lambda, ell)?;
    Ok(AuditRecord::new(Metric::KUnitTotalVariation, measured, bound, Witness::Subset { column: None, members, positive }))
}

/// `max_i |a_i − a′_i|` of two k-unit allocations against `f_ℓ(λ)`.
pub fn kunit_vs_audit(a: &[f64], a2: &[f64], lambda: f64, ell: f64) -> Result<AuditRecord, Error> {
    same_len(a, a2)?;
    let mut best = (0.0, Witness::None);
    for (i, (x, y)) in a.iter().zip(a2).enumerate() {
        let d = (x - y).abs();
        if d > best.0 || best.1 == Witness::None {
            best = (d, Witness::Entry { advertiser: i, slot: 0 });
        }
    }
    Ok(AuditRecord::new(Metric::KUnit, best.0, stability_bound(lambda, ell)?, best.1))
}

/// Advertisers by `α_t/α′_t` non-increasing, as runs of tied ratios.
fn ratio_groups(alpha: &[f64], alpha2: &[f64]) -> Vec<Vec<usize>> {
    let r: Vec<f64> = alpha.iter().zip(alpha2).map(|(a, b)| a / b).collect();
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for t in order {
        match groups.last_mut() {
            Some(g) if (r[g[0]] - r[t]).abs() <= TIE_TOL * r[g[0]] => g.push(t),
            _ => groups.push(vec![t]),
        }
    }
    groups
}

/// Value stability for similar users with heterogeneous preferences.
///
/// For every slot prefix `j` and advertiser prefix `i` of the `α/α′` ordering, checks
/// `Σ_{t≤i} Σ_{s≤j} M′_{t,s} − M_{t,s} ≤ i·f_ℓ(λ)`. Within a group of tied ratios the
/// members are placed in the order that makes the left side largest, which covers every
/// admissible ordering. `measured` is the largest left side divided by `i`.
pub fn heterogeneous_pref_audit(
    m: &AllocationMatrix,
    m2: &AllocationMatrix,
    alpha: &[f64],
    alpha2: &[f64],
    lambda_values: f64,
    ell: f64,
) -> Result<AuditRecord, Error> {
    same_shape(m, m2)?;
    if alpha.len() != m.n() || alpha2.len() != m.n() {
        return Err(Error::DimensionMismatch);
    }
    for (index, &a) in alpha.iter().chain(alpha2).enumerate() {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::NonPositiveAlpha { index: index % m.n() });
        }
    }
    let bound = stability_bound(lambda_values, ell)?;
    let groups = ratio_groups(alpha, alpha2);
    let mut best = (f64::NEG_INFINITY, Witness::None);
    for j in 1..=m.k() {
        let gap = |t: usize| m2.cumulative()[j][t] - m.cumulative()[j][t];
        let mut order = Vec::with_capacity(m.n());
        for g in &groups {
            let mut g = g.clone();
            g.sort_by(|&a, &b| gap(b).total_cmp(&gap(a)).then(a.cmp(&b)));
            order.extend(g);
        }
        let mut acc = 0.0;
        for (idx, &t) in order.iter().enumerate() {
            acc += gap(t);
            let normalized = acc / (idx + 1) as f64;
            if normalized > best.0 {
                best = (normalized, Witness::HeteroPrefix { prefix: idx + 1, slots: j, order: order.clone() });
            }
        }
    }
    let measured = if best.1 == Witness::None { 0.0 } else { best.0 };
    Ok(AuditRecord::new(Metric::Heterogeneous, measured, bound, best.1))
}

impl Witness {
    /// Recomputes the measured deviation of a matrix audit from the witness alone.
    pub fn replay(&self, m: &AllocationMatrix, m2: &AllocationMatrix) -> f64 {
        match self {
            Witness::None => 0.0,
            Witness::Entry { advertiser, slot } => (m.get(*advertiser, *slot) - m2.get(*advertiser, *slot)).abs(),
            Witness::Prefix { advertiser, slots } => {
                (m.cumulative()[*slots][*advertiser] - m2.cumulative()[*slots][*advertiser]).abs()
            }
            Witness::Weighted { advertiser, h } => {
                let i = *advertiser;
                h.iter().enumerate().map(|(j, hj)| hj * (m.get(i, j) - m2.get(i, j))).sum::<f64>().abs()
            }
            Witness::Subset { column, members, positive } => {
                let j = column.unwrap_or(0);
                let s: f64 = members.iter().map(|&i| m.get(i, j) - m2.get(i, j)).sum();
                if *positive {
                    s
                } else {
                    -s
                }
            }
            Witness::HeteroPrefix { prefix, slots, order } => {
                let s: f64 = order[..*prefix]
                    .iter()
                    .map(|&t| m2.cumulative()[*slots][t] - m.cumulative()[*slots][t])
                    .sum();
                s / *prefix as f64
            }
        }
    }
}

/// Definitions understood by [`audit_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definition {
    Weak,
    Ordered,
    Tv,
    Hetero,
}

impl core::str::FromStr for Definition {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim() {
            "weak" => Ok(Definition::Weak),
            "ordered" => Ok(Definition::Ordered),
            "tv" => Ok(Definition::Tv),
            "hetero" => Ok(Definition::Hetero),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    /// `λ` over effective values, used by the weak, ordered and TV audits.
    pub lambda_effective: f64,
    /// `λ` over raw values, used by the heterogeneous audit.
    pub lambda_values: f64,
    pub records: Vec<AuditRecord>,
}

impl FairnessReport {
    pub fn all_satisfied(&self) -> bool {
        self.records.iter().all(|r| r.satisfied)
    }
}

/// Runs the mechanism on both instances and audits the requested definitions.
///
/// `lambda_override` replaces both computed `λ` values.
pub fn audit_pair(
    a: &AuctionInstance,
    b: &AuctionInstance,
    config: &MechanismConfig,
    definitions: &[Definition],
    lambda_override: Option<f64>,
) -> Result<FairnessReport, Error> {
    if a.n() != b.n() || a.k() != b.k() {
        return Err(Error::DimensionMismatch);
    }
    let m = generalized(a, config)?;
    let m2 = generalized(b, config)?;
    let lambda_effective = match lambda_override {
        Some(l) => l,
        None => lambda_of(&a.effective_values(), &b.effective_values())?,
    };
    let lambda_values = match lambda_override {
        Some(l) => l,
        None => lambda_of(a.values(), b.values())?,
    };
    let ell = config.ell;
    let mut records = Vec::new();
    for d in definitions {
        match d {
            Definition::Weak => records.push(weak_vs_audit(&m, &m2, lambda_effective, ell)?),
            Definition::Ordered => records.push(ordered_vs_audit_all(&m, &m2, lambda_effective, ell)?),
            Definition::Tv => records.extend(tv_vs_audit(&m, &m2, lambda_effective, ell)?),
            Definition::Hetero => {
                records.push(heterogeneous_pref_audit(&m, &m2, a.alpha(), b.alpha(), lambda_values, ell)?)
            }
        }
    }
    Ok(FairnessReport { lambda_effective, lambda_values, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Family;
    use crate::{generalized_ipa, generalized_pa};

    fn inst(v: &[f64], alpha: &[f64], k: usize) -> AuctionInstance {
        AuctionInstance::new(v.to_vec(), alpha.to_vec(), vec![1.0; k], k).unwrap()
    }

    fn mat(rows: &[&[f64]]) -> AllocationMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        AllocationMatrix::from_rows(&rows, rows[0].len(), 1e-12).unwrap()
    }

    #[test]
    fn identical_matrices_pass_everything() {
        let m = generalized_ipa(&inst(&[4.0, 2.0, 1.0], &[1.0; 3], 2), 1.0).unwrap();
        let w = weak_vs_audit(&m, &m, 1.0, 1.0).unwrap();
        assert_eq!((w.measured, w.bound, w.satisfied), (0.0, 0.0, true));
        for r in tv_vs_audit(&m, &m, 1.0, 1.0).unwrap() {
            assert_eq!(r.measured, 0.0);
        }
        let h = heterogeneous_pref_audit(&m, &m, &[1.0; 3], &[1.0; 3], 1.0, 1.0).unwrap();
        assert!(h.satisfied);
        assert_eq!(h.measured, 0.0);
    }

    #[test]
    fn weak_example_lambda_four() {
        let a = inst(&[4.0, 2.0, 1.0], &[1.0; 3], 2);
        let b = inst(&[1.0, 2.0, 1.0], &[1.0; 3], 2);
        let lambda = lambda_of(&a.effective_values(), &b.effective_values()).unwrap();
        assert_eq!(lambda, 4.0);
        let (m, m2) = (generalized_ipa(&a, 1.0).unwrap(), generalized_ipa(&b, 1.0).unwrap());
        let w = weak_vs_audit(&m, &m2, lambda, 1.0).unwrap();
        assert!((w.bound - 1.875).abs() < 1e-15);
        assert!(w.satisfied);
        assert_eq!(w.witness.replay(&m, &m2), w.measured);
        let o = ordered_vs_audit(&m, &m2, 0, &OrderedWeights::Worst, lambda, 1.0).unwrap();
        assert!((o.bound - 0.9375).abs() < 1e-15);
        assert!(o.satisfied);
        assert_eq!(o.witness.replay(&m, &m2), o.measured);
    }

    #[test]
    fn lambda_one_forces_equality() {
        let m = mat(&[&[0.6], &[0.4]]);
        let m2 = mat(&[&[0.5], &[0.5]]);
        let w = weak_vs_audit(&m, &m2, 1.0, 1.0).unwrap();
        assert!(!w.satisfied);
        assert_eq!(w.witness, Witness::Entry { advertiser: 0, slot: 0 });
    }

    #[test]
    fn ordered_special_weights() {
        let m = mat(&[&[0.5, 0.2], &[0.3, 0.3], &[0.2, 0.5]]);
        let m2 = mat(&[&[0.3, 0.1], &[0.4, 0.4], &[0.3, 0.5]]);
        let all = ordered_vs_audit(&m, &m2, 0, &OrderedWeights::Explicit(vec![1.0, 1.0]), 2.0, 1.0).unwrap();
        assert!((all.measured - 0.3).abs() < 1e-15);
        let first = ordered_vs_audit(&m, &m2, 0, &OrderedWeights::Explicit(vec![1.0, 0.0]), 2.0, 1.0).unwrap();
        assert!((first.measured - 0.2).abs() < 1e-15);
        assert_eq!(
            ordered_vs_audit(&m, &m2, 0, &OrderedWeights::Explicit(vec![0.0, 1.0]), 2.0, 1.0),
            Err(Error::InvalidH)
        );
        assert_eq!(
            ordered_vs_audit(&m, &m2, 0, &OrderedWeights::Explicit(vec![1.5, 1.0]), 2.0, 1.0),
            Err(Error::InvalidH)
        );
    }

    #[test]
    fn tv_subset_witness() {
        let m = mat(&[&[0.5], &[0.25], &[0.25]]);
        let m2 = mat(&[&[0.375], &[0.375], &[0.25]]);
        let r = &tv_vs_audit(&m, &m2, 1.0, 1.0).unwrap()[0];
        assert_eq!(r.measured, 0.125);
        assert_eq!(r.witness, Witness::Subset { column: Some(0), members: vec![0], positive: true });
        assert_eq!(r.witness.replay(&m, &m2), r.measured);
    }

    #[test]
    fn dimension_mismatch() {
        let m = mat(&[&[0.5], &[0.5]]);
        let m2 = mat(&[&[0.5], &[0.25], &[0.25]]);
        assert_eq!(weak_vs_audit(&m, &m2, 1.0, 1.0), Err(Error::DimensionMismatch));
        assert_eq!(tv_vs_audit(&m, &m2, 1.0, 1.0), Err(Error::DimensionMismatch));
    }

    #[test]
    fn heterogeneous_example() {
        // same values, user 1 barely clicks advertiser 2
        let a = inst(&[1.0, 10.0], &[1.0, 0.01], 1);
        let b = inst(&[1.0, 10.0], &[1.0, 1.0], 1);
        for family in [Family::Ipa, Family::Pa] {
            let config = MechanismConfig::new(family, 1.0).unwrap();
            let (m, m2) = (generalized(&a, &config).unwrap(), generalized(&b, &config).unwrap());
            // advertiser 0 comes first (ratio 1 ≥ 0.01) and user 1 gives it more
            assert!(m.get(0, 0) >= m2.get(0, 0));
            let h = heterogeneous_pref_audit(&m, &m2, a.alpha(), b.alpha(), 1.0, 1.0).unwrap();
            assert!(h.satisfied, "{family}: {h:?}");
            assert_eq!(h.witness.replay(&m, &m2), h.measured);
        }
    }

    #[test]
    fn heterogeneous_ties_are_adversarial() {
        // both ratios tie; the order that puts advertiser 1 first exposes a gain of 0.2
        let m = mat(&[&[0.6], &[0.4]]);
        let m2 = mat(&[&[0.4], &[0.6]]);
        let h = heterogeneous_pref_audit(&m, &m2, &[1.0, 2.0], &[1.0, 2.0], 1.0, 1.0).unwrap();
        assert!((h.measured - 0.2).abs() < 1e-15);
        assert!(!h.satisfied);
        assert_eq!(h.witness, Witness::HeteroPrefix { prefix: 1, slots: 1, order: vec![1, 0] });
    }

    #[test]
    fn heterogeneous_slack_scales_with_prefix() {
        let m = mat(&[&[0.5], &[0.5]]);
        let h = heterogeneous_pref_audit(&m, &m, &[1.0, 1.0], &[1.0, 1.0], 2.0, 1.0).unwrap();
        assert!((h.bound - 0.75).abs() < 1e-15);
        assert_eq!(
            heterogeneous_pref_audit(&m, &m, &[1.0, 0.0], &[1.0, 1.0], 2.0, 1.0),
            Err(Error::NonPositiveAlpha { index: 1 })
        );
    }

    #[test]
    fn kunit_vector_audits() {
        let a = crate::kunit_pa(&[4.0, 2.0, 1.0], 1, 1.0).unwrap().a;
        let b = crate::kunit_pa(&[4.0, 2.0, 2.0], 1, 1.0).unwrap().a;
        let r = kunit_tv_audit(&a, &b, 2.0, 1.0).unwrap();
        assert!((r.bound - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.satisfied);
        let r = kunit_vs_audit(&a, &b, 2.0, 1.0).unwrap();
        assert!(r.satisfied);
    }

    #[test]
    fn pair_report() {
        let a = inst(&[4.0, 2.0, 1.0], &[1.0; 3], 2);
        let config = MechanismConfig::new(Family::Pa, 1.0).unwrap();
        let all = [Definition::Weak, Definition::Ordered, Definition::Tv, Definition::Hetero];
        let r = audit_pair(&a, &a, &config, &all, None).unwrap();
        assert_eq!(r.records.len(), 5);
        assert!(r.all_satisfied());
        let _ = generalized_pa(&a, 1.0).unwrap();
    }
}
