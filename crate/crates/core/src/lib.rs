//! Gaussian approximation toolkit for nonstationary, high-dimensional time
//! series.
//!
//! * [`matops`]: symmetric-matrix numerics (Jacobi eigensolver, PSD parts,
//!   square roots, trace norm, Gaussian 2-Wasserstein distance).
//! * [`procmodel`]: kernels `X_t = G_t(eps_t)`, addressable innovations,
//!   physical dependence measures and analytic covariances.
//! * [`coupling`]: explicit Gaussian couplings and the approximation rates.
//! * [`covest`]: the overlapping-window cumulative long-run covariance
//!   estimator.
//! * [`inference`]: sequential mean and CUSUM statistics, Monte-Carlo
//!   quantiles and the offset rejection rule.
//! * [`harness`]: simulation experiments and the command line front end.

// `!(x > a)` is how NaN gets rejected; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod coupling;
pub mod covest;
pub mod error;
pub mod harness;
pub mod inference;
pub mod matops;
pub mod procmodel;

pub use error::{Error, Result};
