//! Social welfare, the unfair optimum and approximation guarantees.

use alloc::vec;
use alloc::vec::Vec;

use crate::instance::{AuctionInstance, Family, MechanismConfig};
use crate::position::{generalized, AllocationMatrix};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareResult {
    pub alg: f64,
    pub opt: f64,
    /// `alg / opt`, or 1 when `opt = 0`.
    pub ratio: f64,
    pub bound: f64,
    /// Whether `bound` is a proven guarantee for this instance shape.
    pub applicable: bool,
}

/// Welfare of sorting advertisers by effective value into slots.
pub fn opt_welfare(inst: &AuctionInstance) -> f64 {
    let mut vhat = inst.effective_values().0;
    vhat.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (j, &b) in inst.beta().iter().enumerate() {
        acc += vhat[j] * b;
    }
    acc
}

/// `Σ_{i,j} v̂_i β_j M_{i,j}`, column by column.
pub fn allocation_welfare(inst: &AuctionInstance, m: &AllocationMatrix) -> Result<f64, Error> {
    if m.n() != inst.n() || m.k() != inst.k() {
        return Err(Error::DimensionMismatch);
    }
    let vhat = inst.effective_values();
    let mut acc = 0.0;
    for (j, &b) in inst.beta().iter().enumerate() {
        let col: f64 = (0..m.n()).map(|i| vhat[i] * m.get(i, j)).sum();
        acc += col * b;
    }
    Ok(acc)
}

/// `1 − ℓ^ℓ / (1 + ℓ)^{ℓ+1}`.
pub fn ipa_bound(ell: f64) -> f64 {
    1.0 - libm::exp(ell * libm::log(ell) - (ell + 1.0) * libm::log1p(ell))
}

/// `(n−k)/n · (n−k)^{−1/ℓ} + 1/n`, with whether `n − k > ((ℓ+2)/ℓ)^ℓ` holds.
pub fn pa_bound(n: usize, k: usize, ell: f64) -> (f64, bool) {
    if n <= k {
        return (1.0, true);
    }
    let free = (n - k) as f64;
    let n = n as f64;
    let bound = free / n * libm::pow(free, -1.0 / ell) + 1.0 / n;
    let applicable = free > libm::pow((ell + 2.0) / ell, ell);
    (bound, applicable)
}

/// Runs the mechanism and compares with the unfair optimum.
pub fn mechanism_welfare(inst: &AuctionInstance, config: &MechanismConfig) -> Result<WelfareResult, Error> {
    let m = generalized(inst, config)?;
    let alg = allocation_welfare(inst, &m)?;
    let opt = opt_welfare(inst);
    let ratio = if opt > 0.0 { alg / opt } else { 1.0 };
    let (bound, applicable) = match config.family {
        Family::Ipa => (ipa_bound(config.ell), true),
        Family::Pa => pa_bound(inst.n(), inst.k(), config.ell),
    };
    Ok(WelfareResult { alg, opt, ratio, bound, applicable })
}

/// `k` bids of 1 and `n − k` bids of `eps`, unit CTRs and `k` slots of CTR 1.
pub fn ipa_tight_instance(k: usize, n: usize, eps: f64) -> Result<AuctionInstance, Error> {
    if n <= 2 * k {
        return Err(Error::BadShape { n, k });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let mut values = vec![1.0; k];
    values.resize(n, eps);
    AuctionInstance::new(values, vec![1.0; n], vec![1.0; k], k)
}

/// IPA ratios on the tight family for each `n`, `ℓ = 1`.
pub fn ipa_tight_ratios(k: usize, ns: &[usize], eps: f64) -> Result<Vec<f64>, Error> {
    let config = MechanismConfig::new(Family::Ipa, 1.0)?;
    ns.iter().map(|&n| Ok(mechanism_welfare(&ipa_tight_instance(k, n, eps)?, &config)?.ratio)).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::position::unfair_opt_matrix;
    use crate::generalized_ipa;

    fn inst(v: &[f64], beta: &[f64]) -> AuctionInstance {
        AuctionInstance::new(v.to_vec(), vec![1.0; v.len()], beta.to_vec(), beta.len()).unwrap()
    }

    #[test]
    fn opt_examples() {
        assert_eq!(opt_welfare(&inst(&[4.0, 2.0, 1.0], &[1.0, 0.5])), 5.0);
        assert_eq!(opt_welfare(&inst(&[0.0, 0.0], &[1.0])), 0.0);
        assert_eq!(opt_welfare(&inst(&[1.0, 2.0, 3.0], &[1.0; 3])), 6.0);
    }

    #[test]
    fn ipa_welfare_example() {
        let i = inst(&[4.0, 2.0, 1.0], &[1.0, 0.5]);
        let m = generalized_ipa(&i, 1.0).unwrap();
        let w = allocation_welfare(&i, &m).unwrap();
        assert!((w - 181.0 / 42.0).abs() < 1e-14);
        let r = mechanism_welfare(&i, &MechanismConfig::new(Family::Ipa, 1.0).unwrap()).unwrap();
        assert!((r.ratio - 181.0 / 210.0).abs() < 1e-14);
        assert_eq!(r.bound, 0.75);
    }

    #[test]
    fn opt_matrix_is_consistent() {
        let i = AuctionInstance::new(vec![0.3, 5.0, 2.0, 2.0], vec![2.0, 0.1, 1.0, 1.0], vec![0.9, 0.4, 0.1], 3).unwrap();
        assert_eq!(allocation_welfare(&i, &unfair_opt_matrix(&i)).unwrap(), opt_welfare(&i));
    }

    #[test]
    fn zero_matrix_has_no_welfare() {
        let i = AuctionInstance::new(vec![1.0], vec![1.0], vec![], 0).unwrap();
        let m = generalized_ipa(&i, 1.0).unwrap();
        assert_eq!(allocation_welfare(&i, &m).unwrap(), 0.0);
    }

    #[test]
    fn ipa_bound_values() {
        assert_eq!(ipa_bound(1.0), 0.75);
        assert!((ipa_bound(2.0) - 23.0 / 27.0).abs() < 1e-15);
        assert!(1.0 - ipa_bound(50.0) < 0.02);
    }

    #[test]
    fn pa_bound_values() {
        let (b, ok) = pa_bound(13, 1, 1.0);
        assert!((b - 2.0 / 13.0).abs() < 1e-15);
        assert!(ok);
        assert_eq!(pa_bound(4, 4, 2.0), (1.0, true));
        let (b, ok) = pa_bound(2, 1, 1.0);
        assert!((b - 1.0).abs() < 1e-15);
        assert!(!ok);
    }

    #[test]
    fn tight_instance_shape() {
        assert_eq!(ipa_tight_instance(1, 2, 0.5), Err(Error::BadShape { n: 2, k: 1 }));
        assert_eq!(ipa_tight_instance(1, 5, 1.0), Err(Error::InvalidEpsilon(1.0)));
        let i = ipa_tight_instance(2, 7, 0.25).unwrap();
        assert_eq!(i.values(), [1.0, 1.0, 0.25, 0.25, 0.25, 0.25, 0.25]);
        assert_eq!(i.beta(), [1.0, 1.0]);
    }

    #[test]
    fn tight_ratios_decrease() {
        let r = ipa_tight_ratios(1, &[13, 25, 49, 101], 0.5).unwrap();
        assert!((r[0] - 0.76).abs() < 1e-12);
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(r.iter().all(|&x| x > 0.75));
    }
}
