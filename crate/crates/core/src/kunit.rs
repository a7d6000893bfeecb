//! k-unit water-filling allocations.
//!
//! Both families reduce to a parametric problem `Σ_i min(1, t·w_i) = target`:
//!
//! * IPA (floor form): `w_i = v̂_i^{−ℓ}`, target `n − k`, allocation `1 − min(1, t·w_i)`.
//! * PA (cap form): `w_i = v̂_i^{ℓ}`, target `k`, allocation `min(1, t·w_i)`.
//!
//! The left-hand side is piecewise linear in `t` with breakpoints `1/w_i`, so the level is
//! found exactly by walking the segments.

use alloc::vec;
use alloc::vec::Vec;

use crate::instance::{check_ell, Family};
use crate::Error;

/// Water level reported with a k-unit allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaterLevel {
    /// Level `t` in units of `g(v̂)`.
    Level(f64),
    /// `k = 0`, all effective values zero, or fewer than `k` positive values.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KUnitAllocation {
    pub a: Vec<f64>,
    pub water_level: WaterLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `a_i = 1 − min(1, t·w_i)`; target `Σ min(1, t·w_i) = n − k`.
    FloorOneMinus,
    /// `a_i = min(1, t·w_i)`; target `Σ min(1, t·w_i) = k`.
    CapAtOne,
}

/// A maximal interval of `t` on which the saturated set is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Entries with `t·w_i ≥ 1` on the segment (infinite weights included).
    pub saturated: usize,
    /// Sum of the unsaturated weights: the slope of the total in `t`.
    pub slope: f64,
}

/// The function `t ↦ Σ_i min(1, t·w_i)` for a fixed weight vector.
#[derive(Debug, Clone)]
pub struct SaturationProfile {
    /// Finite positive weights, non-increasing.
    sorted: Vec<f64>,
    /// `suffix[c] = Σ_{m ≥ c} sorted[m]`, summed smallest first.
    suffix: Vec<f64>,
    /// Infinite weights: saturated for every `t > 0`.
    infinite: usize,
}

impl SaturationProfile {
    pub fn new(weights: &[f64]) -> Result<Self, Error> {
        let mut sorted = Vec::with_capacity(weights.len());
        let mut infinite = 0;
        for (index, &w) in weights.iter().enumerate() {
            if w.is_nan() || w < 0.0 {
                return Err(Error::InvalidWeight { index });
            }
            if w == f64::INFINITY {
                infinite += 1;
            } else if w > 0.0 {
                sorted.push(w);
            }
        }
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut suffix = vec![0.0; sorted.len() + 1];
        for c in (0..sorted.len()).rev() {
            suffix[c] = suffix[c + 1] + sorted[c];
        }
        Ok(Self { sorted, suffix, infinite })
    }

    /// Number of finite positive weights.
    pub fn positive(&self) -> usize {
        self.sorted.len()
    }

    pub fn infinite(&self) -> usize {
        self.infinite
    }

    /// Largest reachable total.
    pub fn capacity(&self) -> usize {
        self.infinite + self.sorted.len()
    }

    /// `Σ_i min(1, t·w_i)`, with infinite weights counted as saturated even at `t = 0`.
    pub fn total(&self, t: f64) -> f64 {
        let finite: f64 = self.sorted.iter().map(|&w| (t * w).min(1.0)).sum();
        finite + self.infinite as f64
    }

    /// The segments covering `[0, ∞)`; the last one has zero slope.
    pub fn segments(&self) -> Vec<Segment> {
        let m = self.sorted.len();
        let mut out = Vec::with_capacity(m + 1);
        let mut lo = 0.0;
        for c in 0..=m {
            let hi = if c < m { 1.0 / self.sorted[c] } else { f64::INFINITY };
            out.push(Segment { t_lo: lo, t_hi: hi, saturated: self.infinite + c, slope: self.suffix[c] });
            lo = hi;
        }
        out
    }

    /// Smallest `t ≥ 0` with `total(t) = target`.
    pub fn solve(&self, target: f64) -> Result<f64, Error> {
        let base = self.infinite as f64;
        let cap = self.capacity() as f64;
        if !(target >= base && target <= cap) {
            return Err(Error::Infeasible);
        }
        if target == base {
            return Ok(0.0);
        }
        let m = self.sorted.len();
        let mut lo = 0.0;
        for c in 0..m {
            let hi = 1.0 / self.sorted[c];
            let need = target - base - c as f64;
            // total at the end of this segment is base + c + 1 (entry c saturates at hi)
            if need <= hi * self.suffix[c] || c + 1 == m {
                let t = need / self.suffix[c];
                return Ok(t.clamp(lo, hi));
            }
            lo = hi;
        }
        // m == 0 and target == base was handled above
        Err(Error::Infeasible)
    }
}

/// Solves the water level for `weights` and returns it with the allocation.
///
/// `k` is the number of units to hand out. Infinite weights stand for effective value zero
/// in the floor form.
pub fn water_level_solve(weights: &[f64], k: usize, direction: Direction) -> Result<(f64, Vec<f64>), Error> {
    let n = weights.len();
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let profile = SaturationProfile::new(weights)?;
    let target = match direction {
        Direction::CapAtOne => k,
        Direction::FloorOneMinus => n - k,
    };
    let t = profile.solve(target as f64)?;
    let alloc = weights
        .iter()
        .map(|&w| {
            let filled = if w == f64::INFINITY { 1.0 } else { (t * w).min(1.0) };
            match direction {
                Direction::CapAtOne => filled,
                Direction::FloorOneMinus => 1.0 - filled,
            }
        })
        .collect();
    Ok((t, alloc))
}

fn check_inputs(vhat: &[f64], k: usize, ell: f64) -> Result<(), Error> {
    check_ell(ell)?;
    if k > vhat.len() {
        return Err(Error::KExceedsN { k, n: vhat.len() });
    }
    for (index, &v) in vhat.iter().enumerate() {
        if !(v >= 0.0) || v == f64::INFINITY {
            return Err(Error::InvalidWeight { index });
        }
    }
    Ok(())
}

/// Allocations that do not need a water level, or `None`.
///
/// With fewer than `k` positive values every positive advertiser is fully served and the
/// zero-valued ones share the remaining units evenly.
fn degenerate(vhat: &[f64], k: usize) -> Option<KUnitAllocation> {
    let n = vhat.len();
    if k == 0 {
        return Some(KUnitAllocation { a: vec![0.0; n], water_level: WaterLevel::Degenerate });
    }
    let p = vhat.iter().filter(|&&v| v > 0.0).count();
    if p > k {
        return None;
    }
    let rest = if p < n { (k - p) as f64 / (n - p) as f64 } else { 0.0 };
    let a = vhat.iter().map(|&v| if v > 0.0 { 1.0 } else { rest }).collect();
    Some(KUnitAllocation { a, water_level: WaterLevel::Degenerate })
}

fn max_value(vhat: &[f64]) -> f64 {
    vhat.iter().fold(0.0f64, |m, &v| m.max(v))
}

/// k-unit IPA by elimination.
///
/// Advertisers are scanned in non-increasing `v̂` order (ties by index). The lowest one is
/// dropped while `(s − k)·g(v̂_s) ≥ Σ_{t≤s} g(v̂_t)`; survivors get
/// `a_i = 1 − (s − k)·g(v̂_i)/Σ_{t≤s} g(v̂_t)` and the rest get 0.
pub fn kunit_ipa(vhat: &[f64], k: usize, ell: f64) -> Result<KUnitAllocation, Error> {
    check_inputs(vhat, k, ell)?;
    if let Some(d) = degenerate(vhat, k) {
        return Ok(d);
    }
    // Scale so the largest value is 1; g is then in [1, ∞) and cannot underflow to 0.
    let m = max_value(vhat);
    let mut order: Vec<usize> = (0..vhat.len()).filter(|&i| vhat[i] > 0.0).collect();
    order.sort_by(|&a, &b| vhat[b].total_cmp(&vhat[a]).then(a.cmp(&b)));
    let g: Vec<f64> = order.iter().map(|&i| libm::pow(vhat[i] / m, -ell)).collect();

    let mut s = order.len();
    let mut sum: f64 = g.iter().rev().sum();
    while s > k && (s - k) as f64 * g[s - 1] >= sum {
        s -= 1;
        sum = g[..s].iter().rev().sum();
    }
    let t = (s - k) as f64 / sum;
    let mut a = vec![0.0; vhat.len()];
    for (pos, &i) in order.iter().enumerate().take(s) {
        // s == k only when the eliminated weights overflowed; survivors are then full
        a[i] = if s == k { 1.0 } else { (1.0 - t * g[pos]).max(0.0) };
    }
    Ok(KUnitAllocation { a, water_level: WaterLevel::Level(t * libm::pow(m, ell)) })
}

/// k-unit PA: `a_i = min(1, T·v̂_i^ℓ)` with `Σ_i a_i = k`.
pub fn kunit_pa(vhat: &[f64], k: usize, ell: f64) -> Result<KUnitAllocation, Error> {
    check_inputs(vhat, k, ell)?;
    if let Some(d) = degenerate(vhat, k) {
        return Ok(d);
    }
    let n = vhat.len();
    let mut a = vec![0.0; n];
    let mut rest: Vec<usize> = (0..n).filter(|&i| vhat[i] > 0.0).collect();
    let mut units = k;
    loop {
        let m = rest.iter().fold(0.0f64, |m, &i| m.max(vhat[i]));
        let w: Vec<f64> = rest.iter().map(|&i| libm::pow(vhat[i] / m, ell)).collect();
        let live = w.iter().filter(|&&x| x > 0.0).count();
        if live >= units {
            let (t, sub) = water_level_solve(&w, units, Direction::CapAtOne)?;
            for (&i, x) in rest.iter().zip(sub) {
                a[i] = x;
            }
            return Ok(KUnitAllocation { a, water_level: WaterLevel::Level(t / libm::pow(m, ell)) });
        }
        // Weights below the float range: everything representable saturates and the
        // remaining units go to the underflowed values, rescaled.
        let mut next = Vec::new();
        for (&i, &x) in rest.iter().zip(&w) {
            if x > 0.0 {
                a[i] = 1.0;
            } else {
                next.push(i);
            }
        }
        units -= live;
        rest = next;
    }
}

pub fn kunit(family: Family, vhat: &[f64], k: usize, ell: f64) -> Result<KUnitAllocation, Error> {
    match family {
        Family::Ipa => kunit_ipa(vhat, k, ell),
        Family::Pa => kunit_pa(vhat, k, ell),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn ipa_examples() {
        let r = kunit_ipa(&[4.0, 2.0, 1.0], 2, 1.0).unwrap();
        assert!(close(&r.a, &[6.0 / 7.0, 5.0 / 7.0, 3.0 / 7.0], 1e-15));
        match r.water_level {
            WaterLevel::Level(t) => assert!((t - 4.0 / 7.0).abs() < 1e-15),
            WaterLevel::Degenerate => panic!("expected a level"),
        }
        let r = kunit_ipa(&[10.0, 10.0, 1.0], 1, 1.0).unwrap();
        assert!(close(&r.a, &[0.5, 0.5, 0.0], 1e-15));
        let r = kunit_ipa(&[3.0; 5], 2, 2.5).unwrap();
        assert!(close(&r.a, &[0.4; 5], 1e-15));
    }

    #[test]
    fn pa_examples() {
        let r = kunit_pa(&[3.0, 2.0, 1.0], 1, 1.0).unwrap();
        assert!(close(&r.a, &[0.5, 1.0 / 3.0, 1.0 / 6.0], 1e-15));
        let r = kunit_pa(&[4.0, 2.0, 1.0], 2, 1.0).unwrap();
        assert!(close(&r.a, &[1.0, 2.0 / 3.0, 1.0 / 3.0], 1e-15));
        let r = kunit_pa(&[0.7; 4], 3, 0.5).unwrap();
        assert!(close(&r.a, &[0.75; 4], 1e-15));
    }

    #[test]
    fn degenerate_branches() {
        for f in [Family::Ipa, Family::Pa] {
            let r = kunit(f, &[1.0, 2.0], 0, 1.0).unwrap();
            assert_eq!(r.a, [0.0, 0.0]);
            let r = kunit(f, &[0.0; 4], 2, 1.0).unwrap();
            assert_eq!(r.a, [0.5; 4]);
            assert_eq!(r.water_level, WaterLevel::Degenerate);
            let r = kunit(f, &[5.0, 0.0, 0.0], 2, 1.0).unwrap();
            assert_eq!(r.a, [1.0, 0.5, 0.5]);
            let r = kunit(f, &[5.0, 0.0, 3.0], 2, 1.0).unwrap();
            assert_eq!(r.a, [1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn zero_values_get_nothing() {
        let r = kunit_ipa(&[5.0, 0.0, 3.0, 1.0], 2, 1.0).unwrap();
        assert_eq!(r.a[1], 0.0);
        assert!((r.a.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        let r = kunit_pa(&[5.0, 0.0, 3.0, 1.0], 2, 1.0).unwrap();
        assert_eq!(r.a[1], 0.0);
        assert!((r.a.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(kunit_ipa(&[1.0], 2, 1.0), Err(Error::KExceedsN { k: 2, n: 1 }));
        assert_eq!(kunit_pa(&[1.0, -1.0], 1, 1.0), Err(Error::InvalidWeight { index: 1 }));
        assert_eq!(kunit_pa(&[1.0, 1.0], 1, -1.0), Err(Error::InvalidEll(-1.0)));
    }

    #[test]
    fn water_level_examples() {
        let (t, a) = water_level_solve(&[0.25, 0.5, 1.0], 2, Direction::FloorOneMinus).unwrap();
        assert!((t - 4.0 / 7.0).abs() < 1e-15);
        assert!(close(&a, &[6.0 / 7.0, 5.0 / 7.0, 3.0 / 7.0], 1e-15));
        let (t, a) = water_level_solve(&[4.0, 2.0, 1.0], 2, Direction::CapAtOne).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
        assert!(close(&a, &[1.0, 2.0 / 3.0, 1.0 / 3.0], 1e-15));
        let (t, a) = water_level_solve(&[1.0, 1.0], 2, Direction::CapAtOne).unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(a, [1.0, 1.0]);
    }

    #[test]
    fn water_level_infeasible() {
        assert_eq!(water_level_solve(&[1.0, 0.0], 2, Direction::CapAtOne), Err(Error::Infeasible));
        let inf = f64::INFINITY;
        // two zero-valued IPA advertisers already exceed the unallocated mass n − k = 1
        assert_eq!(water_level_solve(&[inf, inf, 1.0], 2, Direction::FloorOneMinus), Err(Error::Infeasible));
        let (t, a) = water_level_solve(&[inf, 1.0, 1.0], 2, Direction::FloorOneMinus).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(a, [0.0, 1.0, 1.0]);
    }

    #[test]
    fn segments_cover_half_line() {
        let p = SaturationProfile::new(&[1.0, 4.0, 0.0, 2.0, f64::INFINITY]).unwrap();
        let s = p.segments();
        assert_eq!(s.len(), 4);
        assert_eq!(s[0].t_lo, 0.0);
        assert_eq!(s[3].t_hi, f64::INFINITY);
        assert_eq!(s[0].saturated, 1);
        assert_eq!(s[0].slope, 7.0);
        assert_eq!(s[1].t_lo, 0.25);
        assert_eq!(s[3].slope, 0.0);
        for w in s.windows(2) {
            assert_eq!(w[0].t_hi, w[1].t_lo);
        }
        for target in [1.0, 1.5, 2.0, 3.3, 4.0] {
            let t = p.solve(target).unwrap();
            assert!((p.total(t) - target).abs() < 1e-12);
        }
    }

    #[test]
    fn sums_to_k_under_extreme_spread() {
        let v = [1e-300, 1e300, 1.0, 1e-5, 3.0];
        for f in [Family::Ipa, Family::Pa] {
            for k in 0..=5 {
                let a = kunit(f, &v, k, 4.0).unwrap().a;
                assert!((a.iter().sum::<f64>() - k as f64).abs() < 1e-9, "{f} {k} {a:?}");
                assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }
}
