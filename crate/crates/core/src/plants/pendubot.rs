//! Pendubot in lumped-parameter form, state `[q1, q2, q̇1, q̇2]`, torque on
//! the first joint only.
//!
//! `q1` is measured from the positive x-axis, so with the cosine gravity
//! vector the links point straight up at `q = [π/2, 0]` and straight down at
//! `q = [−π/2, 0]`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Vector2};
#[allow(unused_imports)]
use num_traits::Float;

use super::{reject_unknown, scale};
use crate::dynamics::{ControlAffine, InputBounds};
use crate::error::Result;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendubotParams {
    pub theta: [f64; 5],
    pub g: f64,
    /// Link masses the lumped parameters were identified for, kg.
    pub m1: f64,
    pub m2: f64,
    /// Torque limit, N·m.
    pub input_limit: f64,
}

impl Default for PendubotParams {
    fn default() -> Self {
        Self {
            theta: [3.48e-3, 1.20e-3, 1.07e-3, 933.4e-3, 280.4e-3],
            g: 9.81,
            m1: 0.12,
            m2: 0.11,
            input_limit: 4.0,
        }
    }
}

impl PendubotParams {
    /// Rescales the lumped parameters for link masses `s1·m1`, `s2·m2`.
    ///
    /// θ2, θ3 and θ5 only involve link 2 and scale with `s2`. θ1 and θ4 mix
    /// both links and scale with the total-mass ratio.
    pub fn with_mass_scales(&self, s1: f64, s2: f64) -> Self {
        let mixed = (self.m1 * s1 + self.m2 * s2) / (self.m1 + self.m2);
        let t = self.theta;
        Self {
            theta: [t[0] * mixed, t[1] * s2, t[2] * s2, t[3] * mixed, t[4] * s2],
            ..*self
        }
    }

    pub fn inertia(&self, q2: f64) -> Matrix2<f64> {
        let [t1, t2, t3, _, _] = self.theta;
        let c2 = q2.cos();
        Matrix2::new(t1 + t2 + 2.0 * t3 * c2, t2 + t3 * c2, t2 + t3 * c2, t2)
    }

    pub fn coriolis(&self, q2: f64, qd1: f64, qd2: f64) -> Matrix2<f64> {
        let t3 = self.theta[2];
        let s2 = q2.sin();
        Matrix2::new(
            -t3 * s2 * qd2,
            -t3 * s2 * qd2 - t3 * s2 * qd1,
            t3 * s2 * qd1,
            0.0,
        )
    }

    pub fn gravity(&self, q1: f64, q2: f64) -> Vector2<f64> {
        let (t4, t5) = (self.theta[3], self.theta[4]);
        let c12 = (q1 + q2).cos();
        Vector2::new(
            t4 * self.g * q1.cos() + t5 * self.g * c12,
            t5 * self.g * c12,
        )
    }
}

fn inverse_inertia(p: &PendubotParams, q2: f64) -> Matrix2<f64> {
    p.inertia(q2)
        .try_inverse()
        .expect("Pendubot inertia matrix is positive definite")
}

fn drift(p: &PendubotParams, x: &Vector) -> Vector {
    let (q1, q2, qd1, qd2) = (x[0], x[1], x[2], x[3]);
    let dinv = inverse_inertia(p, q2);
    let qdd = -(dinv * (p.coriolis(q2, qd1, qd2) * Vector2::new(qd1, qd2) + p.gravity(q1, q2)));
    Vector::from_column_slice(&[qd1, qd2, qdd[0], qdd[1]])
}

fn gain(p: &PendubotParams, x: &Vector) -> Matrix {
    let dinv = inverse_inertia(p, x[1]);
    Matrix::from_column_slice(4, 1, &[0.0, 0.0, dinv[(0, 0)], dinv[(1, 0)]])
}

/// `[q̇1, q̇2, q̈1, q̈2]` for torque `u` on joint 1.
pub fn pendubot_derivative(p: &PendubotParams, x: &Vector, u: f64) -> Vector {
    drift(p, x) + gain(p, x) * u
}

/// Swing-up reward, maximal (zero) at `q = [0, 0]`.
pub fn pendubot_reward(x: &Vector) -> f64 {
    let (q1, q2) = (x[0], x[1]);
    -3.0 * (q1.sin().abs() + (q1.cos() - 1.0).abs() + q2.sin().abs() + (q2.cos() - 1.0).abs())
}

/// [`pendubot_reward`] of the deviation from `x_eq`, so that balancing at
/// [`Pendubot::UPRIGHT`] scores zero.
pub fn pendubot_reward_about(x: &Vector, x_eq: &Vector) -> f64 {
    pendubot_reward(&(x - x_eq))
}

/// Lowest per-step value of [`pendubot_reward`], reached at `q1 = q2 = 3π/4`.
pub const PENDUBOT_WORST_REWARD: f64 = -6.0 * (1.0 + core::f64::consts::SQRT_2);

#[derive(Debug, Clone)]
pub struct Pendubot {
    pub params: PendubotParams,
    bounds: InputBounds,
    state_set_bound: f64,
}

impl Pendubot {
    /// Upright balancing equilibrium.
    pub const UPRIGHT: [f64; 4] = [FRAC_PI_2, 0.0, 0.0, 0.0];

    /// `‖x‖ ≤ 20` assumed for the admissible set (angles within a turn,
    /// rates below ~15 rad/s).
    pub fn new(params: PendubotParams) -> Self {
        Self {
            bounds: InputBounds::symmetric(&[params.input_limit]).expect("positive limit"),
            params,
            state_set_bound: 20.0,
        }
    }

    /// Keys: `m1_scale`, `m2_scale`.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        reject_unknown(overrides, "pendubot", &["m1_scale", "m2_scale"])?;
        let s1 = scale(overrides, "m1_scale")?;
        let s2 = scale(overrides, "m2_scale")?;
        Ok(Self {
            params: self.params.with_mass_scales(s1, s2),
            ..self.clone()
        })
    }
}

impl Default for Pendubot {
    fn default() -> Self {
        Self::new(PendubotParams::default())
    }
}

impl ControlAffine for Pendubot {
    fn state_dim(&self) -> usize {
        4
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &Vector) -> Vector {
        drift(&self.params, x)
    }
    fn input_gain(&self, x: &Vector) -> Matrix {
        gain(&self.params, x)
    }
    fn input_bounds(&self) -> &InputBounds {
        &self.bounds
    }
    fn state_set_bound(&self) -> f64 {
        self.state_set_bound
    }
}
