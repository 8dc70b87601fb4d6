//! Cart-pole with a uniform pole, state `[x, ẋ, θ̇, θ]`, θ measured
//! anti-clockwise from hanging down.

use alloc::collections::BTreeMap;
use alloc::string::String;

#[allow(unused_imports)]
use num_traits::Float;

use super::{reject_unknown, scale};
use crate::dynamics::{ControlAffine, InputBounds};
use crate::error::Result;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    /// Cart mass, kg.
    pub m1: f64,
    /// Pole mass, kg.
    pub m2: f64,
    /// Pole length, m.
    pub l: f64,
    /// Cart friction, N/(m/s).
    pub b: f64,
    pub g: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            m1: 0.5,
            m2: 0.5,
            l: 0.6,
            b: 0.1,
            g: 9.82,
        }
    }
}

fn denominators(p: &CartPoleParams, cos4: f64) -> (f64, f64) {
    let d = 4.0 * (p.m1 + p.m2) - 3.0 * p.m2 * cos4 * cos4;
    (d, p.l * d)
}

fn drift(p: &CartPoleParams, x: &Vector) -> Vector {
    let (x2, x3, x4) = (x[1], x[2], x[3]);
    let (s, c) = x4.sin_cos();
    let (d, dl) = denominators(p, c);
    let xdd = (2.0 * p.m2 * p.l * x3 * x3 * s + 3.0 * p.m2 * p.g * s * c - 4.0 * p.b * x2) / d;
    let thdd = (-3.0 * p.m2 * p.l * x3 * x3 * s * c - 6.0 * (p.m1 + p.m2) * p.g * s
        + 6.0 * p.b * x2 * c)
        / dl;
    Vector::from_column_slice(&[x2, xdd, thdd, x3])
}

fn gain(p: &CartPoleParams, x: &Vector) -> Matrix {
    let c = x[3].cos();
    let (d, dl) = denominators(p, c);
    Matrix::from_column_slice(4, 1, &[0.0, 4.0 / d, -6.0 * c / dl, 0.0])
}

/// `ẋ` of the cart-pole under horizontal force `u`.
pub fn cartpole_derivative(p: &CartPoleParams, x: &Vector, u: f64) -> Vector {
    drift(p, x) + gain(p, x) * u
}

/// Total mechanical energy (kinetic + gravitational, zero at the pivot
/// height).
pub fn cartpole_energy(p: &CartPoleParams, x: &Vector) -> f64 {
    let (xd, thd, th) = (x[1], x[2], x[3]);
    let kinetic = 0.5 * (p.m1 + p.m2) * xd * xd
        + 0.5 * p.m2 * p.l * xd * thd * th.cos()
        + p.m2 * p.l * p.l * thd * thd / 6.0;
    let potential = -p.m2 * p.g * 0.5 * p.l * th.cos();
    kinetic + potential
}

#[derive(Debug, Clone)]
pub struct CartPole {
    pub params: CartPoleParams,
    bounds: InputBounds,
    state_set_bound: f64,
}

impl CartPole {
    /// Force limit 10 N; `‖x‖ ≤ 10` assumed for the admissible set.
    pub fn new(params: CartPoleParams) -> Self {
        Self {
            params,
            bounds: InputBounds::symmetric(&[10.0]).expect("static bounds"),
            state_set_bound: 10.0,
        }
    }

    /// Keys: `m1_scale`, `m2_scale`, `l_scale`.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        reject_unknown(overrides, "cart-pole", &["m1_scale", "m2_scale", "l_scale"])?;
        let mut out = self.clone();
        out.params.m1 *= scale(overrides, "m1_scale")?;
        out.params.m2 *= scale(overrides, "m2_scale")?;
        out.params.l *= scale(overrides, "l_scale")?;
        Ok(out)
    }

    pub fn with_bounds(mut self, bounds: InputBounds) -> Self {
        self.bounds = bounds;
        self
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new(CartPoleParams::default())
    }
}

impl ControlAffine for CartPole {
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
