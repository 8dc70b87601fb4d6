//! Adaptive CLF-CBF quadratic program.
//!
//! Given an uncertainty estimate `σ̂` with error bound `γ`, the CLF and CBF
//! conditions are tightened by `‖V_x‖γ` and `‖h_x‖γ`, and the input is
//! chosen by
//!
//! ```text
//! min ½uᵀHu + p d²
//! s.t. Ψ_V(x, u) + c1 V(x) ≤ d,   Ψ_h(x, u) ≥ −α(h(x)),
//!      u_min ≤ u ≤ u_max,          d ≥ 0.
//! ```

pub mod acc;

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dynamics::{ControlAffine, InputBounds};
use crate::error::{check_dim, Error, Result};
use crate::qp::solve_dense_qp;
use crate::{Matrix, Vector};

pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Tolerance for declaring the barrier constraint unsatisfiable.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone)]
pub struct ClfSpec {
    pub v: ScalarFn,
    pub grad: GradientFn,
    /// Decay rate, 1/s.
    pub c1: f64,
    /// Optional quadratic bounds `c2‖x‖² ≤ V ≤ c3‖x‖²`; informational.
    pub c2: Option<f64>,
    pub c3: Option<f64>,
}

impl ClfSpec {
    pub fn new(
        v: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        c1: f64,
    ) -> Self {
        Self {
            v: Arc::new(v),
            grad: Arc::new(grad),
            c1,
            c2: None,
            c3: None,
        }
    }
}

#[derive(Clone)]
pub struct CbfSpec {
    pub h: ScalarFn,
    pub grad: GradientFn,
    /// Extended class-K function `α`.
    pub alpha: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CbfSpec {
    /// Barrier with `α(h) = h`.
    pub fn new(
        h: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            h: Arc::new(h),
            grad: Arc::new(grad),
            alpha: Arc::new(|h| h),
        }
    }

    pub fn with_alpha(mut self, alpha: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.alpha = Arc::new(alpha);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpWeights {
    /// Input weight `H`.
    pub h_weight: Matrix,
    /// Slack penalty `p`.
    pub p_slack: f64,
}

impl QpWeights {
    pub fn validate(&self, m: usize) -> Result<()> {
        check_dim("QP input weight", m, self.h_weight.nrows())?;
        check_dim("QP input weight", m, self.h_weight.ncols())?;
        if self.h_weight.clone().cholesky().is_none() {
            return Err(Error::Config(
                "QP input weight must be positive definite".into(),
            ));
        }
        if !(self.p_slack > 0.0) {
            return Err(Error::Config(format!(
                "slack penalty must be positive, got {}",
                self.p_slack
            )));
        }
        Ok(())
    }
}

/// Lie derivatives `(∇s·f, ∇s·g)` of a scalar with gradient `grad` at `x`.
fn lie(grad: &Vector, model: &dyn ControlAffine, x: &Vector) -> (f64, Vector) {
    let lf = grad.dot(&model.drift(x));
    let lg = model.input_gain(x).transpose() * grad;
    (lf, lg)
}

/// `Ψ_V = L_fV + L_gV u + V_x σ̂ + ‖V_x‖ γ`.
pub fn psi_v(
    clf: &ClfSpec,
    model: &dyn ControlAffine,
    x: &Vector,
    u: &Vector,
    sigma_hat: &Vector,
    gamma: f64,
) -> f64 {
    let grad = (clf.grad)(x);
    let (lf, lg) = lie(&grad, model, x);
    lf + lg.dot(u) + grad.dot(sigma_hat) + grad.norm() * gamma
}

/// `Ψ_h = L_fh + L_gh u + h_x σ̂ − ‖h_x‖ γ`.
pub fn psi_h(
    cbf: &CbfSpec,
    model: &dyn ControlAffine,
    x: &Vector,
    u: &Vector,
    sigma_hat: &Vector,
    gamma: f64,
) -> f64 {
    let grad = (cbf.grad)(x);
    let (lf, lg) = lie(&grad, model, x);
    lf + lg.dot(u) + grad.dot(sigma_hat) - grad.norm() * gamma
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClbfSolution {
    pub u: Vector,
    pub slack: f64,
    pub objective: f64,
    pub cbf_active: bool,
    pub clf_active: bool,
}

/// The input in the box that maximizes `L_gh u`, used when the barrier
/// condition cannot be met. Unbounded directions contribute 0.
pub fn cbf_fallback_input(
    cbf: &CbfSpec,
    model: &dyn ControlAffine,
    x: &Vector,
    bounds: &InputBounds,
) -> Vector {
    let (_, lg) = lie(&(cbf.grad)(x), model, x);
    Vector::from_fn(lg.len(), |j, _| {
        let pick = if lg[j] > 0.0 {
            bounds.upper()[j]
        } else if lg[j] < 0.0 {
            bounds.lower()[j]
        } else {
            0.0f64.clamp(bounds.lower()[j], bounds.upper()[j])
        };
        if pick.is_finite() {
            pick
        } else {
            0.0
        }
    })
}

/// Solves the robust CLF-CBF QP at `x`.
///
/// Inputs are rescaled by the box half-widths before the dense solve. Fails
/// with [`Error::Infeasible`] carrying the shortfall `−(Ψ_h + α(h))` at the
/// most favourable input when the barrier condition cannot be met.
#[allow(clippy::too_many_arguments)]
pub fn solve_ad_clbf_qp(
    clf: &ClfSpec,
    cbf: &CbfSpec,
    weights: &QpWeights,
    model: &dyn ControlAffine,
    x: &Vector,
    sigma_hat: &Vector,
    gamma: f64,
    bounds: &InputBounds,
) -> Result<ClbfSolution> {
    let m = model.input_dim();
    check_dim("state", model.state_dim(), x.len())?;
    check_dim("uncertainty estimate", model.state_dim(), sigma_hat.len())?;
    check_dim("input bounds", m, bounds.dim())?;
    weights.validate(m)?;
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }

    let v_grad = (clf.grad)(x);
    let h_grad = (cbf.grad)(x);
    let (lf_v, lg_v) = lie(&v_grad, model, x);
    let (lf_h, lg_h) = lie(&h_grad, model, x);
    // CLF:  L_gV u − d ≤ −r_v
    let r_v = lf_v + v_grad.dot(sigma_hat) + v_grad.norm() * gamma + clf.c1 * (clf.v)(x);
    // CBF: −L_gh u ≤ r_h
    let r_h = lf_h + h_grad.dot(sigma_hat) - h_grad.norm() * gamma + (cbf.alpha)((cbf.h)(x));
    if [r_v, r_h]
        .iter()
        .chain(lg_v.iter())
        .chain(lg_h.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::Config(format!("non-finite QP data at x = {x:?}")));
    }

    let best_u = cbf_fallback_input(cbf, model, x, bounds);
    let unbounded_help = (0..m).any(|j| {
        (lg_h[j] > 0.0 && !bounds.upper()[j].is_finite())
            || (lg_h[j] < 0.0 && !bounds.lower()[j].is_finite())
    });
    let best = r_h + lg_h.dot(&best_u);
    if !unbounded_help && best < -FEASIBILITY_TOLERANCE * (1.0 + r_h.abs()) {
        return Err(Error::Infeasible { margin: -best });
    }

    let scale = Vector::from_fn(m, |j, _| {
        let s = bounds.lower()[j].abs().max(bounds.upper()[j].abs());
        if s.is_finite() && s > 0.0 {
            s
        } else {
            1.0
        }
    });
    let s_mat = Matrix::from_diagonal(&scale);
    let nz = m + 1;
    let mut p = Matrix::zeros(nz, nz);
    p.view_mut((0, 0), (m, m))
        .copy_from(&(&s_mat * &weights.h_weight * &s_mat));
    p[(m, m)] = 2.0 * weights.p_slack;

    let mut rows: Vec<Vector> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut clf_row = Vector::zeros(nz);
    let mut cbf_row = Vector::zeros(nz);
    for j in 0..m {
        clf_row[j] = lg_v[j] * scale[j];
        cbf_row[j] = -lg_h[j] * scale[j];
    }
    clf_row[m] = -1.0;
    rows.push(clf_row);
    rhs.push(-r_v);
    rows.push(cbf_row);
    rhs.push(r_h);
    for j in 0..m {
        if bounds.upper()[j].is_finite() {
            let mut r = Vector::zeros(nz);
            r[j] = 1.0;
            rows.push(r);
            rhs.push(bounds.upper()[j] / scale[j]);
        }
        if bounds.lower()[j].is_finite() {
            let mut r = Vector::zeros(nz);
            r[j] = -1.0;
            rows.push(r);
            rhs.push(-bounds.lower()[j] / scale[j]);
        }
    }
    let mut slack_row = Vector::zeros(nz);
    slack_row[m] = -1.0;
    rows.push(slack_row);
    rhs.push(0.0);

    let a = Matrix::from_fn(rows.len(), nz, |i, j| rows[i][j]);
    let b = Vector::from_column_slice(&rhs);
    let sol = solve_dense_qp(&p, &Vector::zeros(nz), &a, &b)?;
    let u = bounds.clamp(&sol.z.rows(0, m).component_mul(&scale));
    let slack = sol.z[m].max(0.0);
    let objective = 0.5 * u.dot(&(&weights.h_weight * &u)) + weights.p_slack * slack * slack;
    Ok(ClbfSolution {
        u,
        slack,
        objective,
        clf_active: sol.active.contains(&0),
        cbf_active: sol.active.contains(&1),
    })
}
