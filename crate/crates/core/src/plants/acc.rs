//! Adaptive-cruise-control longitudinal model, state `[v_l, v_f, D]`.
//!
//! The nominal model knows only `f = [a_l, 0, v_l − v_f]` and
//! `g = [0, 1/m, 0]`. The true plant adds the rolling/aerodynamic drag
//! `−F_r(v_f)/m`, and the road disturbance `δ(t)` is supplied as an additive
//! disturbance on the `v_f` channel.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::{reject_unknown, scale};
use crate::dynamics::{ControlAffine, InputBounds, PerturbationSpec};
use crate::error::Result;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccParams {
    /// Following-car mass, kg.
    pub m: f64,
    pub g: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    /// Desired cruise speed, m/s.
    pub v_d: f64,
    /// Time headway, s.
    pub tau_d: f64,
    /// Lead-car acceleration, m/s².
    pub a_l: f64,
    /// Input magnitude limit, N.
    pub u_max: f64,
    /// Road-disturbance amplitude as a fraction of `g`.
    pub disturbance_gain: f64,
    /// Road-disturbance period, s.
    pub disturbance_period: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        let (m, g) = (1650.0, 9.81);
        Self {
            m,
            g,
            f0: 0.1,
            f1: 5.0,
            f2: 0.25,
            v_d: 22.0,
            tau_d: 1.8,
            a_l: 0.0,
            u_max: 0.4 * m * g,
            disturbance_gain: 0.2,
            disturbance_period: 10.0,
        }
    }
}

impl AccParams {
    pub const X0: [f64; 3] = [18.0, 12.0, 80.0];

    /// Drag force `F_r = f0 + f1 v + f2 v²`.
    pub fn drag(&self, v_f: f64) -> f64 {
        self.f0 + self.f1 * v_f + self.f2 * v_f * v_f
    }

    /// Road disturbance `δ(t) = 0.2 g sin(2π t / 10)`.
    pub fn road_disturbance(&self, t: f64) -> f64 {
        self.disturbance_gain * self.g * (2.0 * PI * t / self.disturbance_period).sin()
    }

    /// Lumped uncertainty `Δ = [0, −F_r/m + δ(t), 0]`.
    pub fn uncertainty(&self, t: f64, x: &Vector) -> Vector {
        Vector::from_column_slice(&[
            0.0,
            -self.drag(x[1]) / self.m + self.road_disturbance(t),
            0.0,
        ])
    }

    /// Perturbation carrying `δ(t)` on the `v_f` channel.
    pub fn road_perturbation(&self) -> PerturbationSpec {
        let p = *self;
        PerturbationSpec::identity(1).with_disturbance(move |t, _| {
            Vector::from_column_slice(&[0.0, p.road_disturbance(t), 0.0])
        })
    }
}

/// True ACC derivative: `v̇_l = a_l`, `v̇_f = (u − F_r)/m + δ(t)`,
/// `Ḋ = v_l − v_f`.
pub fn acc_derivative(p: &AccParams, t: f64, x: &Vector, u: f64) -> Vector {
    Vector::from_column_slice(&[
        p.a_l,
        (u - p.drag(x[1])) / p.m + p.road_disturbance(t),
        x[0] - x[1],
    ])
}

#[derive(Debug, Clone)]
pub struct AccPlant {
    pub params: AccParams,
    include_drag: bool,
    bounds: InputBounds,
    state_set_bound: f64,
}

impl AccPlant {
    /// Speeds within `[0, 160 km/h]`, headway distance within `[0, 100]` m.
    pub const V_MAX: f64 = 160.0 / 3.6;
    pub const D_MAX: f64 = 100.0;

    fn build(params: AccParams, include_drag: bool) -> Self {
        let x_max = (2.0 * Self::V_MAX * Self::V_MAX + Self::D_MAX * Self::D_MAX).sqrt();
        Self {
            bounds: InputBounds::symmetric(&[params.u_max]).expect("positive u_max"),
            params,
            include_drag,
            state_set_bound: x_max,
        }
    }

    /// Model known to the controller (no drag).
    pub fn nominal(params: AccParams) -> Self {
        Self::build(params, false)
    }

    /// Plant including drag; pair with [`AccParams::road_perturbation`].
    pub fn true_plant(params: AccParams) -> Self {
        Self::build(params, true)
    }

    /// Key: `mass_scale`.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        reject_unknown(overrides, "acc", &["mass_scale"])?;
        let mut p = self.params;
        p.m *= scale(overrides, "mass_scale")?;
        Ok(Self {
            params: p,
            ..self.clone()
        })
    }

    pub fn barrier(&self, x: &Vector) -> f64 {
        x[2] - self.params.tau_d * x[1]
    }

    pub fn lyapunov(&self, x: &Vector) -> f64 {
        let e = x[1] - self.params.v_d;
        e * e
    }
}

impl ControlAffine for AccPlant {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &Vector) -> Vector {
        let drag = if self.include_drag {
            -self.params.drag(x[1]) / self.params.m
        } else {
            0.0
        };
        Vector::from_column_slice(&[self.params.a_l, drag, x[0] - x[1]])
    }
    fn input_gain(&self, _x: &Vector) -> Matrix {
        Matrix::from_column_slice(3, 1, &[0.0, 1.0 / self.params.m, 0.0])
    }
    fn input_bounds(&self) -> &InputBounds {
        &self.bounds
    }
    fn state_set_bound(&self) -> f64 {
        self.state_set_bound
    }
}
