//! Estimation-error bound `γ(T_s)` of the piecewise-constant adaptive law.
//!
//! With Lipschitz/bias constants for the uncertainty `Δ = f̃(t,x) + g̃(x)u`
//! and a rate bound `l_u` on the input, the estimate satisfies
//! `‖σ̂(t) − Δ(t)‖ ≤ γ(T_s)` for all `t ≥ T_s`.

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::ControlAffine;
use crate::error::{check_dim, Result};
use crate::Vector;

/// Samples used to estimate `max ‖f + gu‖`.
pub const DERIVATIVE_SAMPLES: usize = 100_000;
/// Safety factor applied to the sampled maximum.
pub const DERIVATIVE_SAFETY: f64 = 1.2;
const SAMPLING_SEED: u64 = 0x005e_ed0f_b00d;

/// Axis-aligned box standing in for the admissible state set.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    pub lower: Vector,
    pub upper: Vector,
}

impl StateBox {
    pub fn new(lower: Vector, upper: Vector) -> Self {
        Self { lower, upper }
    }

    /// Largest `‖x‖` over the box.
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| {
                let c = l.abs().max(u.abs());
                c * c
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UncertaintyBounds {
    /// Lipschitz constant of `f̃` in `x`.
    pub l_ftil: f64,
    /// Lipschitz constant of `f̃` in `t`.
    pub l_t: f64,
    /// Lipschitz constant of `g̃`.
    pub l_gtil: f64,
    /// `‖f̃(t, 0)‖ ≤ b_f̃`.
    pub b_ftil: f64,
    /// `‖g̃(0)‖ ≤ b_g̃`.
    pub b_gtil: f64,
    /// Lipschitz constant of the applied input in time.
    pub l_u: f64,
    pub theta: f64,
    pub phi: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl UncertaintyBounds {
    /// `θ = l_f̃ X + b_f̃ + (l_g̃ X + b_g̃) U` with `X = max‖x‖`, `U = max‖u‖`.
    pub fn theta_for(&self, max_x: f64, max_u: f64) -> f64 {
        self.l_ftil * max_x + self.b_ftil + (self.l_gtil * max_x + self.b_gtil) * max_u
    }

    /// `β = l_t + (l_f̃ + l_g̃ U) φ + (l_g̃ X + b_g̃) l_u`.
    pub fn beta_for(&self, max_x: f64, max_u: f64, phi: f64) -> f64 {
        self.l_t
            + (self.l_ftil + self.l_gtil * max_u) * phi
            + (self.l_gtil * max_x + self.b_gtil) * self.l_u
    }

    /// Fills `θ`, `φ`, `β` for the model over `state_box` and `γ` for
    /// `(a, t_s)`.
    pub fn derive(
        mut self,
        model: &dyn ControlAffine,
        state_box: &StateBox,
        max_u: f64,
        a: f64,
        t_s: f64,
    ) -> Result<Self> {
        let (theta, phi) = compute_theta_phi(model, &self, state_box, max_u)?;
        self.theta = theta;
        self.phi = phi;
        self.beta = self.beta_for(state_box.max_norm(), max_u, phi);
        self.gamma = compute_gamma(&self, a, t_s);
        Ok(self)
    }
}

/// Sampled estimate of `max ‖f(x) + g(x)u‖` over the state box and the
/// model's input box, times [`DERIVATIVE_SAFETY`]. Deterministic.
pub fn max_nominal_rate(model: &dyn ControlAffine, state_box: &StateBox) -> Result<f64> {
    let n = model.state_dim();
    check_dim("state box", n, state_box.lower.len())?;
    check_dim("state box", n, state_box.upper.len())?;
    let ub = model.input_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    let draw = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> f64 {
        if hi > lo {
            lo + (hi - lo) * rng.gen::<f64>()
        } else {
            lo
        }
    };
    let mut best: f64 = 0.0;
    let mut x = Vector::zeros(n);
    let mut u = Vector::zeros(model.input_dim());
    for _ in 0..DERIVATIVE_SAMPLES {
        for i in 0..n {
            x[i] = draw(state_box.lower[i], state_box.upper[i], &mut rng);
        }
        for j in 0..u.len() {
            u[j] = draw(ub.lower()[j], ub.upper()[j], &mut rng);
        }
        let rate = (model.drift(&x) + model.input_gain(&x) * &u).norm();
        best = best.max(rate);
    }
    Ok(DERIVATIVE_SAFETY * best)
}

/// `(θ, φ)`: the uncertainty bound and the state-rate bound
/// `φ = max‖f + gu‖ + θ` (the first term estimated by sampling).
pub fn compute_theta_phi(
    model: &dyn ControlAffine,
    bounds: &UncertaintyBounds,
    state_box: &StateBox,
    max_u: f64,
) -> Result<(f64, f64)> {
    let theta = bounds.theta_for(state_box.max_norm(), max_u);
    let phi = max_nominal_rate(model, state_box)? + theta;
    Ok((theta, phi))
}

/// `γ(T_s) = 2βT_s + (1 − e^{−aT_s})θ`.
pub fn compute_gamma(bounds: &UncertaintyBounds, a: f64, t_s: f64) -> f64 {
    2.0 * bounds.beta * t_s - (-a * t_s).exp_m1() * bounds.theta
}
