//! Explicit Gaussian couplings and the approximation rate functions.
//!
//! * [`PairCoupler`]: couples `N(0, s1)` with `N(0, s2)` at expected squared
//!   distance `||s2 - s1||_tr`.
//! * [`PartialSumCoupler`]: blockwise coupling of two independent Gaussian
//!   sequences with different covariance schedules.
//! * [`decoupled_surrogate`]: block-independent surrogate of a kernel path,
//!   re-exported from [`crate::procmodel`].

mod blocking;
mod gaussian;
mod rates;

pub use blocking::{
    block_boundaries, couple_partial_sums, coupling_bound, delta_rho, surrogate_bound, CoupledPaths, PartialSumCoupler,
};
pub use gaussian::{couple_gaussian_pair, PairCoupler, COUPLING_CLAMP_TOL};
pub use rates::{
    block_size, default_block_length, rate_chi, rate_xi, rate_zaitsev, xi_breakpoint, RateParams, Regime, ZAITSEV_ALPHA,
};

pub use crate::procmodel::decoupled_surrogate;
