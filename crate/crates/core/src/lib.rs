//! Primal-dual proximal splitting with inertia and correction, the classical
//! baselines it is compared against, and the imaging problems used to
//! benchmark them.
//!
//! The saddle problem is `min_x max_y G(x) + <K x, y> - F*(y)`. Step-length
//! schedules live in [`schedules`], one-step maps and the run loop in
//! [`solvers`], gap and certificate evaluation in [`metrics`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod prox;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};
