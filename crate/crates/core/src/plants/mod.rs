//! Concrete plants: cart-pole, Pendubot, quadrotor and the ACC longitudinal
//! model.
//!
//! Each plant owns its parameter record and implements [`ControlAffine`].
//! `with_overrides` builds the perturbed "true" instance from named scale
//! factors; the nominal instance is left untouched.
//!
//! [`ControlAffine`]: crate::dynamics::ControlAffine

pub mod acc;
pub mod cartpole;
pub mod pendubot;
pub mod quadrotor;

pub use acc::{acc_derivative, AccParams, AccPlant};
pub use cartpole::{cartpole_derivative, cartpole_energy, CartPole, CartPoleParams};
pub use pendubot::{
    pendubot_derivative, pendubot_reward, pendubot_reward_about, Pendubot, PendubotParams,
    PENDUBOT_WORST_REWARD,
};
pub use quadrotor::{quadrotor_derivative, Quadrotor, QuadrotorParams};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};

/// Looks up a positive scale factor, defaulting to 1.
pub(crate) fn scale(overrides: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    match overrides.get(key) {
        None => Ok(1.0),
        Some(&v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(&v) => Err(Error::Config(format!(
            "override {key} must be positive, got {v}"
        ))),
    }
}

pub(crate) fn reject_unknown(
    overrides: &BTreeMap<String, f64>,
    plant: &str,
    known: &[&str],
) -> Result<()> {
    match overrides.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!(
            "unknown {plant} override {k:?} (expected one of {known:?})"
        ))),
        None => Ok(()),
    }
}
