//! Infinite-horizon LQR about an equilibrium of a control-affine model.

use alloc::format;

use super::Policy;
use crate::dynamics::{ControlAffine, InputBounds};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{jacobian, solve_care, CareSolution};
use crate::{Matrix, Vector};

/// `u = clamp(u_eq − K (x − x_eq))`.
#[derive(Debug, Clone)]
pub struct LqrPolicy {
    pub x_eq: Vector,
    pub u_eq: Vector,
    pub k: Matrix,
    pub a: Matrix,
    pub b: Matrix,
    pub care: CareSolution,
    bounds: InputBounds,
}

impl Policy for LqrPolicy {
    fn input_dim(&self) -> usize {
        self.u_eq.len()
    }
    fn eval(&self, _t: f64, x: &Vector) -> Vector {
        self.bounds
            .clamp(&(&self.u_eq - &self.k * (x - &self.x_eq)))
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.k.norm())
    }
}

/// Linearizes `f + g u` at `(x_eq, u_eq)` by central differences and solves
/// the continuous-time Riccati equation.
///
/// `eq_tol` bounds `‖f(x_eq) + g(x_eq) u_eq‖`.
pub fn lqr_policy(
    model: &dyn ControlAffine,
    x_eq: &Vector,
    u_eq: &Vector,
    q_state: &Matrix,
    r_input: &Matrix,
    eq_tol: f64,
) -> Result<LqrPolicy> {
    let (n, m) = (model.state_dim(), model.input_dim());
    check_dim("equilibrium state", n, x_eq.len())?;
    check_dim("equilibrium input", m, u_eq.len())?;
    let residual = (model.drift(x_eq) + model.input_gain(x_eq) * u_eq).norm();
    if !(residual <= eq_tol) {
        return Err(Error::Synthesis(format!(
            "(x_eq, u_eq) is not an equilibrium: ‖f + g u‖ = {residual:e}"
        )));
    }
    let a = jacobian(|x| model.drift(x) + model.input_gain(x) * u_eq, x_eq);
    let b = model.input_gain(x_eq);
    let care = solve_care(&a, &b, q_state, r_input)?;
    Ok(LqrPolicy {
        x_eq: x_eq.clone(),
        u_eq: u_eq.clone(),
        k: care.k.clone(),
        a,
        b,
        care,
        bounds: model.input_bounds().clone(),
    })
}
