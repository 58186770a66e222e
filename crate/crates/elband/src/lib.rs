//! Uniform-in-bandwidth Nadaraya-Watson kernel estimators and smoothed
//! empirical-likelihood confidence statements for conditional probabilities
//! P(Y ∈ C | Z = z), together with a Monte Carlo harness that studies the
//! normalized sup statistic over (z, C, h) grids.
//!
//! The crate is organised around the estimand pipeline:
//!
//! * [`kernels`] — compactly supported kernels on `[-1/2,1/2]^d` with cached
//!   L2 norms,
//! * [`model`] — the simulation data-generating process (Z uniform on `[0,1]`,
//!   Y | Z = z exponential with mean 1/z) and the smoothed centring parameter
//!   m(C,h,z),
//! * [`estimators`] — the deviation process W_n, Nadaraya-Watson regression
//!   and the empirical-likelihood building blocks X_n, S_n, U_n,
//! * [`empirical_likelihood`] — the EL ratio R_n(θ,C,h,z): convex-hull check,
//!   Lagrange multiplier, log-ratio and confidence intervals,
//! * [`bandwidth`] — bandwidth intervals and leave-one-out cross-validation,
//! * [`density`] — Parzen-Rosenblatt density estimation with LSCV bandwidth,
//! * [`harness`] — the replication engine behind the `elband` CLI.

// Guards of the form `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod density;
pub mod empirical_likelihood;
mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod model;
pub mod quad;

pub use error::{Error, Result};
pub use kernels::Kernel;
pub use model::{Cell, Dataset, SimulationModel};
