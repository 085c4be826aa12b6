//! Moments of weighted sums of uniform random vectors on spheres, the
//! constants of the sharpened Khinchin-type inequalities for them, and the
//! machinery to verify those inequalities numerically.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod deficit;
pub mod error;
pub mod kernel;
pub mod moments;
pub mod report;
pub mod verifier;

pub use error::{Error, Result};
