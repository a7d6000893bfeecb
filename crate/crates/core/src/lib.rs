//! Individually fair auctions for multi-slot sponsored search.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure, deterministic
//! computations:
//!
//! * [`instance`]: validated auction instances, effective values and the
//!   stability-constraint family `f_ℓ(λ) = 1 − λ^{−2ℓ}`.
//! * [`kunit`]: k-unit inverse-proportional (IPA) and proportional (PA)
//!   water-filling allocations.
//! * [`position`]: the generalized IPA/PA slot-allocation matrices built from
//!   telescoping k-unit allocations.
//! * [`feasibility`]: extension to a doubly stochastic matrix and
//!   Birkhoff–von Neumann decomposition into slot matchings.
//! * [`payments`]: piecewise-rational allocation curves and Myerson payments.
//! * [`audit`]: measurement of every value-stability notion against its bound.
//! * [`welfare`]: social welfare, the unfair optimum and approximation bounds.
//! * [`oracles`]: brute-force reference implementations and random generators.
//!
//! File formats and the command-line front end live in the `fairslot` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audit;
pub mod error;
pub mod feasibility;
pub mod instance;
pub mod kunit;
pub mod oracles;
pub mod payments;
pub mod position;
pub mod quad;
pub mod welfare;

pub use error::Error;
pub use instance::{
    lambda_of, scale_free_lambda, stability_bound, tv_stability_bound, AuctionInstance,
    EffectiveValues, Family, MechanismConfig, StabilityBound,
};
pub use kunit::{kunit, kunit_ipa, kunit_pa, water_level_solve, Direction, KUnitAllocation};
pub use position::{generalized, generalized_ipa, generalized_pa, unfair_opt_matrix, AllocationMatrix};

/// Absolute tolerance used for feasibility and bound checks throughout the crate.
pub const CHECK_TOL: f64 = 1e-9;
