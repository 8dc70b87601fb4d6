//! Rigid-body quadrotor with Euler-angle attitude.
//!
//! State `[x, y, z, ẋ, ẏ, ż, φ, θ, ψ, φ̇, θ̇, ψ̇]`, input wrench
//! `[f_z, τ_φ, τ_θ, τ_ψ]`. Propeller efficiency enters through a
//! plus-configuration motor mixing map with unit arm length and unit drag
//! coefficient: the applied wrench is `Mix · diag(c_p) · Mix⁻¹ · u`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use nalgebra::{Matrix4, Vector4};
#[allow(unused_imports)]
use num_traits::Float;

use super::{reject_unknown, scale};
use crate::dynamics::{ControlAffine, InputBounds};
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Motor thrusts → wrench for the plus configuration.
pub fn plus_mixing() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        0.0, 1.0, 0.0, -1.0, //
        -1.0, 0.0, 1.0, 0.0, //
        1.0, -1.0, 1.0, -1.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    pub m: f64,
    pub inertia: [f64; 3],
    pub g: f64,
    pub prop_coeffs: [f64; 4],
    pub mixing: Matrix4<f64>,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            m: 4.34,
            inertia: [0.082, 0.0845, 0.1377],
            g: 9.81,
            prop_coeffs: [1.0; 4],
            mixing: plus_mixing(),
        }
    }
}

impl QuadrotorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || self.inertia.iter().any(|&i| !(i > 0.0)) {
            return Err(Error::Config(String::from(
                "quadrotor mass and inertias must be positive",
            )));
        }
        if self.mixing.try_inverse().is_none() {
            return Err(Error::Config(String::from(
                "quadrotor mixing matrix is singular",
            )));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.m * self.g
    }

    /// `Mix · diag(c_p) · Mix⁻¹`, exactly the identity when every
    /// coefficient is 1.
    pub fn effectiveness(&self) -> Matrix4<f64> {
        if self.prop_coeffs.iter().all(|&c| c == 1.0) {
            return Matrix4::identity();
        }
        let inv = self.mixing.try_inverse().expect("validated mixing");
        self.mixing * Matrix4::from_diagonal(&Vector4::from(self.prop_coeffs)) * inv
    }
}

fn drift(p: &QuadrotorParams, x: &Vector) -> Vector {
    let [ix, iy, iz] = p.inertia;
    let (pd, td, sd) = (x[9], x[10], x[11]);
    let mut dx = Vector::zeros(12);
    for i in 0..3 {
        dx[i] = x[i + 3];
        dx[i + 6] = x[i + 9];
    }
    dx[5] = -p.g;
    dx[9] = td * sd * (iy - iz) / ix;
    dx[10] = pd * sd * (iz - ix) / iy;
    dx[11] = pd * td * (ix - iy) / iz;
    dx
}

fn nominal_gain(p: &QuadrotorParams, x: &Vector) -> Matrix {
    let (sphi, cphi) = x[6].sin_cos();
    let (sth, cth) = x[7].sin_cos();
    let (spsi, cpsi) = x[8].sin_cos();
    let [ix, iy, iz] = p.inertia;
    let mut g = Matrix::zeros(12, 4);
    g[(3, 0)] = (cphi * sth * cpsi + sphi * spsi) / p.m;
    g[(4, 0)] = (cphi * sth * spsi - sphi * cpsi) / p.m;
    g[(5, 0)] = cphi * cth / p.m;
    g[(9, 1)] = 1.0 / ix;
    g[(10, 2)] = 1.0 / iy;
    g[(11, 3)] = 1.0 / iz;
    g
}

fn gain(p: &QuadrotorParams, x: &Vector) -> Matrix {
    let g = nominal_gain(p, x);
    if p.prop_coeffs.iter().all(|&c| c == 1.0) {
        return g;
    }
    let e = p.effectiveness();
    g * Matrix::from_iterator(4, 4, e.iter().copied())
}

/// `ẋ` under wrench `u`, including the propeller-efficiency map.
pub fn quadrotor_derivative(p: &QuadrotorParams, x: &Vector, u: &Vector) -> Vector {
    drift(p, x) + gain(p, x) * u
}

#[derive(Debug, Clone)]
pub struct Quadrotor {
    pub params: QuadrotorParams,
    bounds: InputBounds,
    state_set_bound: f64,
}

impl Quadrotor {
    /// Thrust in `[0, 500]` N, torques within ±50 N·m; `‖x‖ ≤ 20` assumed.
    pub fn new(params: QuadrotorParams) -> Result<Self> {
        params.validate()?;
        let bounds = InputBounds::new(
            Vector::from_column_slice(&[0.0, -50.0, -50.0, -50.0]),
            Vector::from_column_slice(&[500.0, 50.0, 50.0, 50.0]),
        )?;
        Ok(Self {
            params,
            bounds,
            state_set_bound: 20.0,
        })
    }

    /// Hover wrench `[mg, 0, 0, 0]`.
    pub fn hover_input(&self) -> Vector {
        Vector::from_column_slice(&[self.params.hover_thrust(), 0.0, 0.0, 0.0])
    }

    /// Keys: `mass_scale`, `inertia_scale`, `cp1`..`cp4` (propeller
    /// coefficients, replacing the nominal value).
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        reject_unknown(
            overrides,
            "quadrotor",
            &["mass_scale", "inertia_scale", "cp1", "cp2", "cp3", "cp4"],
        )?;
        let mut p = self.params;
        p.m *= scale(overrides, "mass_scale")?;
        let s = scale(overrides, "inertia_scale")?;
        p.inertia.iter_mut().for_each(|i| *i *= s);
        for (k, c) in p.prop_coeffs.iter_mut().enumerate() {
            let key = format!("cp{}", k + 1);
            if let Some(&v) = overrides.get(&key) {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{key} must be positive, got {v}")));
                }
                *c = v;
            }
        }
        Ok(Self {
            params: p,
            ..self.clone()
        })
    }
}

impl Default for Quadrotor {
    fn default() -> Self {
        Self::new(QuadrotorParams::default()).expect("default parameters are valid")
    }
}

impl ControlAffine for Quadrotor {
    fn state_dim(&self) -> usize {
        12
    }
    fn input_dim(&self) -> usize {
        4
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
