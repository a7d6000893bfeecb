//! Brute-force reference implementations and random generators.
//!
//! Nothing here calls the breakpoint solver: water levels are found by bisection on the
//! raw sum, payments by trapezoid integration over mechanism runs.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{lambda_of, scale_free_lambda, AuctionInstance, Family, MechanismConfig};
use crate::kunit::{kunit, Direction};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub bisection_tol: f64,
    pub payment_grid: usize,
    pub fuzz_trials: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { bisection_tol: 1e-12, payment_grid: 100_000, fuzz_trials: 10_000, seed: 0 }
    }
}

impl OracleConfig {
    pub fn is_valid(&self) -> bool {
        self.bisection_tol > 0.0 && self.payment_grid >= 1 && self.fuzz_trials >= 1
    }
}

fn raw_total(weights: &[f64], t: f64) -> f64 {
    weights
        .iter()
        .map(|&w| if w == f64::INFINITY { 1.0 } else { (t * w).min(1.0) })
        .sum()
}

/// Water-level allocation by bisection on `t`.
pub fn bisect_water_level(weights: &[f64], k: usize, direction: Direction, tol: f64) -> Result<Vec<f64>, Error> {
    let n = weights.len();
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let target = match direction {
        Direction::CapAtOne => k as f64,
        Direction::FloorOneMinus => (n - k) as f64,
    };
    let finish = |t: f64| -> Vec<f64> {
        weights
            .iter()
            .map(|&w| {
                let filled = if w == f64::INFINITY { 1.0 } else { (t * w).min(1.0) };
                match direction {
                    Direction::CapAtOne => filled,
                    Direction::FloorOneMinus => 1.0 - filled,
                }
            })
            .collect()
    };
    if raw_total(weights, 0.0) > target {
        return Err(Error::Infeasible);
    }
    let mut hi = 1.0;
    while raw_total(weights, hi) < target - tol {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Infeasible);
        }
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let total = raw_total(weights, mid);
        if (total - target).abs() < tol {
            return Ok(finish(mid));
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if total < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish(hi))
}

/// k-unit allocation of either family through [`bisect_water_level`].
pub fn oracle_kunit(family: Family, vhat: &[f64], k: usize, ell: f64, tol: f64) -> Result<Vec<f64>, Error> {
    let n = vhat.len();
    let positive = vhat.iter().filter(|&&v| v > 0.0).count();
    if k == 0 {
        return Ok(vec![0.0; n]);
    }
    if positive <= k {
        let share = if positive < n { (k - positive) as f64 / (n - positive) as f64 } else { 0.0 };
        return Ok(vhat.iter().map(|&v| if v > 0.0 { 1.0 } else { share }).collect());
    }
    let top = vhat.iter().fold(0.0f64, |m, &v| m.max(v));
    let weights: Vec<f64> = match family {
        Family::Ipa => vhat
            .iter()
            .map(|&v| if v > 0.0 { libm::pow(v / top, -ell) } else { f64::INFINITY })
            .collect(),
        Family::Pa => vhat.iter().map(|&v| libm::pow(v / top, ell)).collect(),
    };
    let direction = match family {
        Family::Ipa => Direction::FloorOneMinus,
        Family::Pa => Direction::CapAtOne,
    };
    bisect_water_level(&weights, k, direction, tol)
}

/// Click allocation of advertiser `i` at bid `z`, from fresh mechanism runs.
fn click_allocation(inst: &AuctionInstance, i: usize, z: f64, config: &MechanismConfig) -> Result<f64, Error> {
    let mut vhat = inst.effective_values().0;
    vhat[i] = inst.alpha()[i] * z;
    let mut x = 0.0;
    for j in 1..=inst.k() {
        let c = inst.beta_or_zero(j - 1) - inst.beta_or_zero(j);
        if c != 0.0 {
            x += c * kunit(config.family, &vhat, j, config.ell)?.a[i];
        }
    }
    Ok(inst.alpha()[i] * x)
}

/// Myerson payment of advertiser `i` by the trapezoid rule on `grid` intervals of `[0, v_i]`.
///
/// The integrand at 0 is taken as its right limit.
pub fn numeric_payment(inst: &AuctionInstance, i: usize, config: &MechanismConfig, grid: usize) -> Result<f64, Error> {
    if i >= inst.n() {
        return Err(Error::AdvertiserOutOfRange { advertiser: i, n: inst.n() });
    }
    let v = inst.values()[i];
    if v == 0.0 {
        return Ok(0.0);
    }
    let grid = grid.max(1);
    let h = v / grid as f64;
    let mut sum = 0.5 * click_allocation(inst, i, f64::MIN_POSITIVE, config)?;
    for step in 1..grid {
        sum += click_allocation(inst, i, h * step as f64, config)?;
    }
    let top = click_allocation(inst, i, v, config)?;
    sum += 0.5 * top;
    Ok(v * top - h * sum)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    libm::exp(rng.gen_range(libm::log(lo)..=libm::log(hi)))
}

/// Values log-uniform on `[10⁻², 10²]`, `α` log-uniform on `[10⁻¹, 10]`, `β` sorted uniform.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, k: usize) -> Result<AuctionInstance, Error> {
    let values = (0..n).map(|_| log_uniform(rng, 1e-2, 1e2)).collect();
    let alpha = (0..n).map(|_| log_uniform(rng, 1e-1, 1e1)).collect();
    let mut beta: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=1.0)).collect();
    beta.sort_by(|a, b| b.total_cmp(a));
    AuctionInstance::new(values, alpha, beta, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStrategy {
    /// Same CTRs; every value scaled by an independent factor in `[1/λ_max, λ_max]`.
    Random,
    /// Same CTRs; one value (random if `None`) divided by `λ_max²`.
    SingleCoordinate(Option<usize>),
    /// Values as in `Random`, fresh CTRs for the second user.
    Heterogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstancePair {
    pub a: AuctionInstance,
    pub b: AuctionInstance,
    /// `λ` the pair is guaranteed to respect: over effective values for `Random`, the
    /// scale-free `λ` for `SingleCoordinate`, over raw values for `Heterogeneous`.
    pub lambda: f64,
}

/// Random instance pair with multiplicative distance at most `lambda_max`.
pub fn pair_generator(seed: u64, n: usize, k: usize, lambda_max: f64, strategy: PairStrategy) -> Result<InstancePair, Error> {
    if lambda_max.is_nan() || lambda_max < 1.0 {
        return Err(Error::LambdaBelowOne(lambda_max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_instance(&mut rng, n, k)?;
    let (values, alpha, beta, _) = a.clone().into_parts();
    let scaled = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        values
            .iter()
            .map(|&v| if lambda_max == 1.0 { v } else { v * log_uniform(rng, 1.0 / lambda_max, lambda_max) })
            .collect()
    };
    let (b, lambda) = match strategy {
        PairStrategy::Random => {
            let b = AuctionInstance::new(scaled(&mut rng), alpha, beta, k)?;
            let l = lambda_of(&a.effective_values(), &b.effective_values())?;
            (b, l)
        }
        PairStrategy::SingleCoordinate(i) => {
            let i = i.unwrap_or_else(|| rng.gen_range(0..n));
            let b = a.with_value(i, values[i] / (lambda_max * lambda_max))?;
            let l = scale_free_lambda(&a.effective_values(), &b.effective_values())?;
            (b, l)
        }
        PairStrategy::Heterogeneous => {
            let v2 = scaled(&mut rng);
            let alpha2 = (0..n).map(|_| log_uniform(&mut rng, 1e-1, 1e1)).collect();
            let b = AuctionInstance::new(v2, alpha2, beta, k)?;
            let l = lambda_of(a.values(), b.values())?;
            (b, l)
        }
    };
    Ok(InstancePair { a, b, lambda })
}

fn pa_ratio_expr(c: f64, free: f64, ell: f64) -> f64 {
    c + (1.0 - c) / (1.0 + free * libm::pow(c, ell))
}

/// Minimum over `c ∈ [0, 1]` of `c + (1 − c)/(1 + (n − k) c^ℓ)`.
///
/// A grid scan brackets the minimum, then golden-section search refines it to 1e-10.
pub fn pa_worst_ratio(n: usize, k: usize, ell: f64) -> f64 {
    if n <= k {
        return 1.0;
    }
    let free = (n - k) as f64;
    let f = |c: f64| pa_ratio_expr(c, free, ell);
    const GRID: usize = 1000;
    let best = (0..=GRID).min_by(|&a, &b| f(a as f64 / GRID as f64).total_cmp(&f(b as f64 / GRID as f64))).unwrap_or(0);
    let mut lo = best.saturating_sub(1) as f64 / GRID as f64;
    let mut hi = (best + 1).min(GRID) as f64 / GRID as f64;
    let phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    f(0.5 * (lo + hi)).min(f(best as f64 / GRID as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_examples() {
        let a = oracle_kunit(Family::Ipa, &[4.0, 2.0, 1.0], 2, 1.0, 1e-12).unwrap();
        for (x, y) in a.iter().zip([6.0 / 7.0, 5.0 / 7.0, 3.0 / 7.0]) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(oracle_kunit(Family::Pa, &[4.0, 2.0, 1.0], 3, 1.0, 1e-12).unwrap(), [1.0; 3]);
        assert_eq!(oracle_kunit(Family::Ipa, &[4.0, 2.0, 1.0], 0, 1.0, 1e-12).unwrap(), [0.0; 3]);
        let a = bisect_water_level(&[4.0, 2.0, 1.0], 2, Direction::CapAtOne, 1e-12).unwrap();
        for (x, y) in a.iter().zip([1.0, 2.0 / 3.0, 1.0 / 3.0]) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn numeric_payment_two_advertisers() {
        let inst = AuctionInstance::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0], 1).unwrap();
        let config = MechanismConfig::new(Family::Ipa, 1.0).unwrap();
        let p = numeric_payment(&inst, 0, &config, 100_000).unwrap();
        assert!((p - (core::f64::consts::LN_2 - 0.5)).abs() < 1e-6);
        let coarse = numeric_payment(&inst, 0, &config, 1000).unwrap();
        let fine = numeric_payment(&inst, 0, &config, 2000).unwrap();
        assert!((coarse - fine).abs() < 1e-7);
        let zero = inst.with_value(0, 0.0).unwrap();
        assert_eq!(numeric_payment(&zero, 0, &config, 10).unwrap(), 0.0);
    }

    #[test]
    fn pairs_respect_lambda() {
        for seed in 0..50 {
            let p = pair_generator(seed, 6, 2, 3.0, PairStrategy::Random).unwrap();
            assert!(lambda_of(&p.a.effective_values(), &p.b.effective_values()).unwrap() <= 3.0 * (1.0 + 1e-12));
        }
        let p = pair_generator(3, 5, 2, 1.0, PairStrategy::Random).unwrap();
        assert_eq!(p.a, p.b);
        let p = pair_generator(3, 5, 2, 2.0, PairStrategy::SingleCoordinate(Some(0))).unwrap();
        let (va, vb) = (p.a.effective_values(), p.b.effective_values());
        assert!((vb[0] - va[0] / 4.0).abs() < 1e-15 * va[0]);
        assert_eq!(va[1..], vb[1..]);
        assert!((p.lambda - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pa_worst_ratio_values() {
        let r = pa_worst_ratio(2, 1, 1.0);
        assert!((r - (2.0 * core::f64::consts::SQRT_2 - 2.0)).abs() < 1e-9);
        assert!(pa_worst_ratio(2, 1, 60.0) > 0.95);
        assert_eq!(pa_worst_ratio(3, 3, 1.0), 1.0);
    }

    #[test]
    fn random_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let inst = random_instance(&mut rng, 7, 3).unwrap();
            assert!(inst.values().iter().all(|&v| (1e-2..=1e2).contains(&v)));
        }
    }
}
