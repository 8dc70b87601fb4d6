//! L1 adaptive augmentation of baseline policies on uncertain control-affine
//! plants, the adaptive CLF-CBF quadratic-program safety filter, and the
//! supporting trajectory optimizer, plants and simulation engine.
//!
//! The crate is `no_std` and only needs `alloc`. All IO (configuration
//! files, CSV/JSON output, the command-line harness) lives in the `adaug`
//! companion crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ddp;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod l1;
pub mod linalg;
pub mod metrics;
pub mod plants;
pub mod policy;
pub mod qp;
pub mod safe;
pub mod sim;

pub use dynamics::{ControlAffine, InputBounds, PerturbationSpec};
pub use error::{Error, Result};

/// Dense column vector used for states, inputs and disturbance estimates.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for input gains, Jacobians and feedback gains.
pub type Matrix = nalgebra::DMatrix<f64>;
