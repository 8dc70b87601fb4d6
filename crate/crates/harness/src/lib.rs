//! Experiment harness: configuration files, scenario sampling, sweeps,
//! CSV/JSON formats and plotting on top of `adaug-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acc;
pub mod config;
pub mod csvio;
pub mod error;
pub mod jsonio;
pub mod plant;
pub mod quad;
pub mod scenarios;
pub mod svg;
pub mod sweep;

pub use error::{HarnessError, Result};
