//! Rounding of fractional solutions for column-sparse covering integer
//! programs (CIPs) and minimax integer programs (MIPs).
//!
//! The crate is organised bottom-up:
//!
//! * [`tail`]: Chernoff–Hoeffding quantities and symmetric-polynomial
//!   estimators.
//! * [`model`]: instances, sparsity statistics, generators and the JSON
//!   instance format.
//! * [`lp`]: a dense two-phase simplex for desk-scale LP relaxations and
//!   ingestion of externally computed solutions.
//! * [`cip`]: standard/general randomized rounding for CIPs, the Φ
//!   pessimistic estimator and the deterministic branch-by-branch rounding.
//! * [`mip`]: one-slot-per-group randomized rounding with a Las Vegas retry
//!   loop and the scale-up/round/scale-down support reduction.
//! * [`oracle`]: exhaustive ground truth on tiny instances.
//! * [`cli`]: the `lllround` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cip;
pub mod cli;
pub mod error;
pub mod lp;
pub mod mip;
pub mod model;
pub mod oracle;
pub mod tail;

mod numeric;

pub use error::{Error, Result};
