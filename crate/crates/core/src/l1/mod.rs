//! L1 adaptive augmentation: state predictor, piecewise-constant adaptive
//! law, matched/unmatched decomposition and low-pass filtered compensation.
//!
//! The controller estimates the lumped disturbance `σ` of the true plant
//! relative to the nominal model and cancels its matched part within the
//! filter bandwidth. The unmatched part is estimated but never compensated.

pub mod bounds;

pub use bounds::{compute_gamma, compute_theta_phi, StateBox, UncertaintyBounds};

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{g_perp_of, ControlAffine};
use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct L1Params {
    /// Predictor gain `a > 0`, 1/s.
    pub a: f64,
    /// Adaptation period `T_s`, s.
    pub t_s: f64,
    /// Diagonal of the filter bandwidth matrix `K`, 1/s.
    pub k_filter: Vector,
}

impl L1Params {
    pub fn new(a: f64, t_s: f64, k_filter: Vector) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!(
                "predictor gain a must be positive, got {a}"
            )));
        }
        if !(t_s > 0.0 && t_s.is_finite()) {
            return Err(Error::Config(format!(
                "adaptation period must be positive, got {t_s}"
            )));
        }
        if k_filter.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::Config(format!(
                "filter bandwidths must be positive, got {k_filter:?}"
            )));
        }
        Ok(Self { a, t_s, k_filter })
    }

    /// Same bandwidth `k` on all `m` channels.
    pub fn uniform(a: f64, t_s: f64, k: f64, m: usize) -> Result<Self> {
        Self::new(a, t_s, Vector::from_element(m, k))
    }

    /// `a / (e^{aT_s} − 1)`.
    pub fn adaptation_gain(&self) -> f64 {
        self.a / (self.a * self.t_s).exp_m1()
    }
}

/// Mutable estimator/filter state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct L1ControllerState {
    pub x_hat: Vector,
    pub sigma_hat: Vector,
    pub sigma_m: Vector,
    pub sigma_um: Vector,
    /// Filter state, equal to the current `u_L1`.
    pub u_filter: Vector,
}

/// Solves `[g g⊥][σ_m; σ_um] = σ` by LU, returning `(σ_m, σ_um)`.
pub fn decompose_sigma(g: &Matrix, sigma: &Vector) -> Result<(Vector, Vector)> {
    let (n, m) = g.shape();
    check_dim("sigma", n, sigma.len())?;
    let perp = g_perp_of(g)?;
    let mut basis = Matrix::zeros(n, n);
    basis.columns_mut(0, m).copy_from(g);
    basis.columns_mut(m, n - m).copy_from(&perp);
    let coeffs = basis
        .lu()
        .solve(sigma)
        .ok_or_else(|| Error::SingularGeometry("[g g⊥] is singular".into()))?;
    Ok((
        coeffs.rows(0, m).into_owned(),
        coeffs.rows(m, n - m).into_owned(),
    ))
}

#[derive(Debug, Clone)]
pub struct L1Controller {
    params: L1Params,
    state: L1ControllerState,
}

impl L1Controller {
    /// Starts the predictor at the measured state, so `x̃(0) = 0`.
    pub fn new(params: L1Params, x0: &Vector, m: usize) -> Result<Self> {
        check_dim("filter bandwidths", m, params.k_filter.len())?;
        let n = x0.len();
        if m > n {
            return Err(Error::Config(format!(
                "input dimension {m} exceeds state dimension {n}"
            )));
        }
        Ok(Self {
            params,
            state: L1ControllerState {
                x_hat: x0.clone(),
                sigma_hat: Vector::zeros(n),
                sigma_m: Vector::zeros(m),
                sigma_um: Vector::zeros(n - m),
                u_filter: Vector::zeros(m),
            },
        })
    }

    pub fn params(&self) -> &L1Params {
        &self.params
    }

    pub fn state(&self) -> &L1ControllerState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut L1ControllerState {
        &mut self.state
    }

    /// Current compensation `u_L1`.
    pub fn u_l1(&self) -> &Vector {
        &self.state.u_filter
    }

    /// Prediction error `x̃ = x̂ − x`.
    pub fn prediction_error(&self, x: &Vector) -> Vector {
        &self.state.x_hat - x
    }

    /// Integrates `ẋ̂ = f(x) + g(x)u + σ̂ − a(x̂ − x)` over `dt` with the
    /// measured state held at `x`.
    pub fn predictor_step(
        &mut self,
        model: &dyn ControlAffine,
        x: &Vector,
        u: &Vector,
        dt: f64,
    ) -> Result<()> {
        self.predictor_step_between(model, x, x, u, dt)
    }

    /// As [`predictor_step`](Self::predictor_step) with the measured state
    /// interpolated linearly from `x_start` to `x_end` across the step.
    pub fn predictor_step_between(
        &mut self,
        model: &dyn ControlAffine,
        x_start: &Vector,
        x_end: &Vector,
        u: &Vector,
        dt: f64,
    ) -> Result<()> {
        let n = self.state.x_hat.len();
        check_dim("measured state", n, x_start.len())?;
        check_dim("measured state", n, x_end.len())?;
        check_dim("applied input", self.params.k_filter.len(), u.len())?;
        let a = self.params.a;
        let sigma = &self.state.sigma_hat;
        let slope = x_end - x_start;
        let rhs = |frac: f64, xh: &Vector| -> Vector {
            let xm = x_start + &slope * frac;
            let mut d = model.drift(&xm) + model.input_gain(&xm) * u + sigma;
            d.axpy(-a, &(xh - &xm), 1.0);
            d
        };
        let xh = &self.state.x_hat;
        let half = 0.5 * dt;
        let k1 = rhs(0.0, xh);
        let k2 = rhs(0.5, &(xh + &k1 * half));
        let k3 = rhs(0.5, &(xh + &k2 * half));
        let k4 = rhs(1.0, &(xh + &k3 * dt));
        let next = xh + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::ControllerDiverged { t: f64::NAN });
        }
        self.state.x_hat = next;
        Ok(())
    }

    /// Piecewise-constant law `σ̂ = −a/(e^{aT_s} − 1) · (x̂ − x)`, called once
    /// per adaptation boundary.
    pub fn adaptive_update(&mut self, x: &Vector) -> Result<&Vector> {
        check_dim("measured state", self.state.x_hat.len(), x.len())?;
        let gain = self.params.adaptation_gain();
        self.state.sigma_hat = self.prediction_error(x) * (-gain);
        Ok(&self.state.sigma_hat)
    }

    /// Splits `σ̂` into matched and unmatched coordinates at `x`.
    pub fn decompose(&mut self, model: &dyn ControlAffine, x: &Vector) -> Result<()> {
        let (sm, sum) = decompose_sigma(&model.input_gain(x), &self.state.sigma_hat)?;
        self.state.sigma_m = sm;
        self.state.sigma_um = sum;
        Ok(())
    }

    /// Exact zero-order-hold step of `u̇_f = −K(u_f + σ̂_m)` over `t_ctrl`.
    pub fn filter_step(&mut self, t_ctrl: f64) -> &Vector {
        for i in 0..self.state.u_filter.len() {
            let phi = (-self.params.k_filter[i] * t_ctrl).exp();
            self.state.u_filter[i] =
                phi * self.state.u_filter[i] - (1.0 - phi) * self.state.sigma_m[i];
        }
        &self.state.u_filter
    }
}
