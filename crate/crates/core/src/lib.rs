// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod nn;
pub mod pipeline;
pub mod zoo;

pub use error::{Error, Result};
