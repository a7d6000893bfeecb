//! Auction instances, effective values and the stability-constraint family.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;
use core::str::FromStr;

use crate::Error;

/// A validated auction: per-click values, ad-specific CTRs `alpha`, slot CTRs `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionInstance {
    values: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    k: usize,
}

impl AuctionInstance {
    /// Validates and builds an instance.
    ///
    /// Comparisons are exact; no tolerance is applied to user input.
    pub fn new(values: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>, k: usize) -> Result<Self, Error> {
        let n = values.len();
        if n == 0 {
            return Err(Error::EmptyInstance);
        }
        if alpha.len() != n {
            return Err(Error::LengthMismatch { left: n, right: alpha.len() });
        }
        if beta.len() != k {
            return Err(Error::BetaLengthMismatch { expected: k, found: beta.len() });
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { field: "values", index });
            }
            if v < 0.0 {
                return Err(Error::NegativeValue { index });
            }
        }
        for (index, &a) in alpha.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFinite { field: "alpha", index });
            }
            if a <= 0.0 {
                return Err(Error::NonPositiveAlpha { index });
            }
        }
        for (index, &b) in beta.iter().enumerate() {
            if b.is_nan() || !(0.0..=1.0).contains(&b) {
                return Err(Error::BetaOutOfRange { index });
            }
            if index > 0 && b > beta[index - 1] {
                return Err(Error::BetaNotSorted { index });
            }
        }
        if n < k {
            return Err(Error::TooFewAdvertisers { n, k });
        }
        Ok(Self { values, alpha, beta, k })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `beta[j]` for `j < k`, and 0 past the last slot.
    pub fn beta_or_zero(&self, j: usize) -> f64 {
        self.beta.get(j).copied().unwrap_or(0.0)
    }

    pub fn effective_values(&self) -> EffectiveValues {
        EffectiveValues(self.values.iter().zip(&self.alpha).map(|(v, a)| v * a).collect())
    }

    /// Copy of the instance with advertiser `i` bidding `v` instead.
    pub fn with_value(&self, i: usize, v: f64) -> Result<Self, Error> {
        if i >= self.n() {
            return Err(Error::AdvertiserOutOfRange { advertiser: i, n: self.n() });
        }
        let mut values = self.values.clone();
        values[i] = v;
        Self::new(values, self.alpha.clone(), self.beta.clone(), self.k)
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize) {
        (self.values, self.alpha, self.beta, self.k)
    }
}

/// `v̂_i = v_i · α_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveValues(pub Vec<f64>);

impl Deref for EffectiveValues {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Mechanism family: inverse proportional (`g(x) = x^{-ℓ}`) or proportional (`g(x) = x^ℓ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Ipa,
    Pa,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ipa => "ipa",
            Family::Pa => "pa",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFamilyError;

impl fmt::Display for ParseFamilyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("family must be \"ipa\" or \"pa\"")
    }
}

impl FromStr for Family {
    type Err = ParseFamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("ipa") {
            Ok(Family::Ipa)
        } else if s.eq_ignore_ascii_case("pa") {
            Ok(Family::Pa)
        } else {
            Err(ParseFamilyError)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismConfig {
    pub family: Family,
    pub ell: f64,
}

impl MechanismConfig {
    pub fn new(family: Family, ell: f64) -> Result<Self, Error> {
        check_ell(ell)?;
        Ok(Self { family, ell })
    }
}

pub(crate) fn check_ell(ell: f64) -> Result<(), Error> {
    if ell.is_finite() && ell > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidEll(ell))
    }
}

/// `f_ℓ(λ)` together with the `λ` it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBound {
    pub lambda: f64,
    pub value: f64,
}

impl StabilityBound {
    pub fn new(lambda: f64, ell: f64) -> Result<Self, Error> {
        Ok(Self { lambda, value: stability_bound(lambda, ell)? })
    }
}

/// `f_ℓ(λ) = 1 − λ^{−2ℓ}`.
pub fn stability_bound(lambda: f64, ell: f64) -> Result<f64, Error> {
    check_ell(ell)?;
    if lambda.is_nan() || lambda < 1.0 {
        return Err(Error::LambdaBelowOne(lambda));
    }
    if lambda == f64::INFINITY {
        return Ok(1.0);
    }
    // 1 − e^{−2ℓ ln λ} without cancellation near λ = 1.
    Ok(-libm::expm1(-2.0 * ell * libm::log(lambda)))
}

/// `(λ^ℓ − 1)/(λ^ℓ + 1)`, the subset-deviation bound for k-unit PA.
pub fn tv_stability_bound(lambda: f64, ell: f64) -> Result<f64, Error> {
    check_ell(ell)?;
    if lambda.is_nan() || lambda < 1.0 {
        return Err(Error::LambdaBelowOne(lambda));
    }
    if lambda == f64::INFINITY {
        return Ok(1.0);
    }
    let e = libm::expm1(ell * libm::log(lambda));
    Ok(e / (e + 2.0))
}

/// `max_i max(x_i/y_i, y_i/x_i)`, with `0/0 = 1` and `∞` when exactly one entry is zero.
pub fn lambda_of(x: &[f64], y: &[f64]) -> Result<f64, Error> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let mut lambda = 1.0f64;
    for (&a, &b) in x.iter().zip(y) {
        let r = match (a == 0.0, b == 0.0) {
            (true, true) => 1.0,
            (true, false) | (false, true) => return Ok(f64::INFINITY),
            _ => (a / b).max(b / a),
        };
        lambda = lambda.max(r);
    }
    Ok(lambda)
}

/// Smallest `λ` over all rescalings `c·y` of `y`: `sqrt(max r / min r)` with `r_i = x_i / y_i`.
///
/// Scale-free mechanisms cannot tell `y` from `c·y`, so their stability is governed by this
/// quantity rather than by [`lambda_of`].
pub fn scale_free_lambda(x: &[f64], y: &[f64]) -> Result<f64, Error> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        match (a == 0.0, b == 0.0) {
            (true, true) => {}
            (true, false) | (false, true) => return Ok(f64::INFINITY),
            _ => {
                let r = a / b;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    if hi == 0.0 {
        return Ok(1.0);
    }
    Ok(libm::sqrt(hi / lo).max(1.0))
}
