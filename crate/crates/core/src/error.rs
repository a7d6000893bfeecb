use core::fmt;

/// Every failure the library can report.
///
/// Variant names double as the machine-readable diagnostic codes printed by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    NegativeValue { index: usize },
    NonPositiveAlpha { index: usize },
    NonFinite { field: &'static str, index: usize },
    BetaNotSorted { index: usize },
    BetaOutOfRange { index: usize },
    BetaLengthMismatch { expected: usize, found: usize },
    TooFewAdvertisers { n: usize, k: usize },
    EmptyInstance,
    LengthMismatch { left: usize, right: usize },
    InvalidEll(f64),
    LambdaBelowOne(f64),
    KExceedsN { k: usize, n: usize },
    InvalidWeight { index: usize },
    Infeasible,
    NegativeSlotProbability { advertiser: usize, slot: usize, value: f64 },
    NotSubstochastic,
    NoPerfectMatching { remaining_mass: f64 },
    SlotOutOfRange { slot: usize, k: usize },
    AdvertiserOutOfRange { advertiser: usize, n: usize },
    NegativeValueQuery(f64),
    ClosedFormUnavailable { ell: f64 },
    DimensionMismatch,
    InvalidH,
    InvalidMatrix,
    BadShape { n: usize, k: usize },
    InvalidEpsilon(f64),
}

impl Error {
    /// Stable identifier of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeValue { .. } => "NegativeValue",
            Error::NonPositiveAlpha { .. } => "NonPositiveAlpha",
            Error::NonFinite { .. } => "NonFinite",
            Error::BetaNotSorted { .. } => "BetaNotSorted",
            Error::BetaOutOfRange { .. } => "BetaOutOfRange",
            Error::BetaLengthMismatch { .. } => "BetaLengthMismatch",
            Error::TooFewAdvertisers { .. } => "TooFewAdvertisers",
            Error::EmptyInstance => "EmptyInstance",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidEll(_) => "InvalidEll",
            Error::LambdaBelowOne(_) => "LambdaBelowOne",
            Error::KExceedsN { .. } => "KExceedsN",
            Error::InvalidWeight { .. } => "InvalidWeight",
            Error::Infeasible => "Infeasible",
            Error::NegativeSlotProbability { .. } => "NegativeSlotProbability",
            Error::NotSubstochastic => "NotSubstochastic",
            Error::NoPerfectMatching { .. } => "NoPerfectMatching",
            Error::SlotOutOfRange { .. } => "SlotOutOfRange",
            Error::AdvertiserOutOfRange { .. } => "AdvertiserOutOfRange",
            Error::NegativeValueQuery(_) => "NegativeValueQuery",
            Error::ClosedFormUnavailable { .. } => "ClosedFormUnavailable",
            Error::DimensionMismatch => "DimensionMismatch",
            Error::InvalidH => "InvalidH",
            Error::InvalidMatrix => "InvalidMatrix",
            Error::BadShape { .. } => "BadShape",
            Error::InvalidEpsilon(_) => "InvalidEpsilon",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NegativeValue { index } => write!(f, "value {index} is negative"),
            Error::NonPositiveAlpha { index } => write!(f, "alpha {index} is not strictly positive"),
            Error::NonFinite { field, index } => write!(f, "{field}[{index}] is not finite"),
            Error::BetaNotSorted { index } => {
                write!(f, "beta is not non-increasing at position {index}")
            }
            Error::BetaOutOfRange { index } => write!(f, "beta[{index}] is outside [0, 1]"),
            Error::BetaLengthMismatch { expected, found } => {
                write!(f, "beta has {found} entries but k = {expected}")
            }
            Error::TooFewAdvertisers { n, k } => {
                write!(f, "{n} advertisers cannot fill {k} slots")
            }
            Error::EmptyInstance => write!(f, "instance has no advertisers"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::InvalidEll(ell) => write!(f, "ell must be a finite positive number, got {ell}"),
            Error::LambdaBelowOne(l) => write!(f, "lambda must be at least 1, got {l}"),
            Error::KExceedsN { k, n } => write!(f, "k = {k} exceeds n = {n}"),
            Error::InvalidWeight { index } => write!(f, "weight {index} is negative or NaN"),
            Error::Infeasible => write!(f, "no water level reaches the target allocation"),
            Error::NegativeSlotProbability { advertiser, slot, value } => write!(
                f,
                "slot probability M[{advertiser}][{slot}] = {value} is negative"
            ),
            Error::NotSubstochastic => write!(f, "allocation matrix is not doubly substochastic"),
            Error::NoPerfectMatching { remaining_mass } => write!(
                f,
                "support has no perfect matching with {remaining_mass} mass left"
            ),
            Error::SlotOutOfRange { slot, k } => write!(f, "slot count {slot} not in 1..={k}"),
            Error::AdvertiserOutOfRange { advertiser, n } => {
                write!(f, "advertiser {advertiser} not in 0..{n}")
            }
            Error::NegativeValueQuery(v) => write!(f, "cannot evaluate at negative value {v}"),
            Error::ClosedFormUnavailable { ell } => {
                write!(f, "closed-form integration needs ell = 1, got {ell}")
            }
            Error::DimensionMismatch => write!(f, "matrix dimensions differ"),
            Error::InvalidH => write!(f, "h must be non-increasing with entries in [0, 1]"),
            Error::InvalidMatrix => write!(f, "matrix violates allocation invariants"),
            Error::BadShape { n, k } => write!(f, "tight instance needs n > 2k, got n={n}, k={k}"),
            Error::InvalidEpsilon(e) => write!(f, "epsilon must lie in (0, 1), got {e}"),
        }
    }
}

impl core::error::Error for Error {}
