//! Technology-portfolio clustering and Bayesian model averaging for
//! firm-year panels.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub(crate) mod quad;

pub mod bma;
pub mod cli;
pub mod cluster;
pub mod describe;
pub mod panel;
pub mod synth;
pub mod tech;

pub use error::{Error, Result};
