//! Adaptive cruise control with three constraint constructions: the true
//! uncertainty (oracle), no uncertainty, and the adaptive estimate with its
//! error bound.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::{cbf_fallback_input, psi_h, solve_ad_clbf_qp, CbfSpec, ClfSpec, QpWeights};
use crate::dynamics::ControlAffine;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::l1::bounds::{compute_gamma, StateBox, UncertaintyBounds};
use crate::l1::{L1Controller, L1Params};
use crate::plants::acc::{acc_derivative, AccParams, AccPlant};
use crate::{Matrix, Vector};

/// Time for the input to swing from `−u_max` to `u_max`, s.
pub const INPUT_SWING_TIME: f64 = 0.1;

/// Assumption constants with the Lipschitz constant of the drag term in
/// force units, `l_f̃ = (f1 + 2 f2 v_max) β`.
pub fn acc_build_constants(
    p: &AccParams,
    beta_margin: f64,
    v_max: f64,
) -> Result<UncertaintyBounds> {
    if !(beta_margin >= 1.0) {
        return Err(Error::Config(format!(
            "beta margin must be at least 1, got {beta_margin}"
        )));
    }
    Ok(UncertaintyBounds {
        l_t: p.disturbance_gain * p.g * 2.0 * PI / p.disturbance_period * beta_margin,
        l_ftil: (p.f1 + 2.0 * p.f2 * v_max) * beta_margin,
        b_ftil: p.disturbance_gain * p.g * beta_margin,
        l_gtil: 0.0,
        b_gtil: 1.0 / p.m,
        l_u: 2.0 * p.u_max / INPUT_SWING_TIME,
        ..UncertaintyBounds::default()
    })
}

/// As [`acc_build_constants`] with the drag Lipschitz constant divided by
/// the mass, matching the acceleration units of `Δ`.
pub fn acc_constants_per_unit_mass(
    p: &AccParams,
    beta_margin: f64,
    v_max: f64,
) -> Result<UncertaintyBounds> {
    let mut b = acc_build_constants(p, beta_margin, v_max)?;
    b.l_ftil /= p.m;
    Ok(b)
}

/// `v, v_l ∈ [0, v_max]`, `D ∈ [0, D_max]`.
pub fn acc_state_box() -> StateBox {
    StateBox::new(
        Vector::zeros(3),
        Vector::from_column_slice(&[AccPlant::V_MAX, AccPlant::V_MAX, AccPlant::D_MAX]),
    )
}

/// Fills `θ`, `φ`, `β`, `γ` over [`acc_state_box`].
pub fn acc_bounds(p: &AccParams, beta_margin: f64, a: f64, t_s: f64) -> Result<UncertaintyBounds> {
    let consts = acc_constants_per_unit_mass(p, beta_margin, AccPlant::V_MAX)?;
    consts.derive(&AccPlant::nominal(*p), &acc_state_box(), p.u_max, a, t_s)
}

pub fn acc_clf(p: &AccParams, c1: f64) -> ClfSpec {
    let v_d = p.v_d;
    ClfSpec::new(
        move |x| (x[1] - v_d) * (x[1] - v_d),
        move |x| Vector::from_column_slice(&[0.0, 2.0 * (x[1] - v_d), 0.0]),
        c1,
    )
}

pub fn acc_cbf(p: &AccParams) -> CbfSpec {
    let tau = p.tau_d;
    CbfSpec::new(
        move |x| x[2] - tau * x[1],
        move |_| Vector::from_column_slice(&[0.0, -tau, 1.0]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccVariant {
    TrueUncertainty,
    IgnoreUncertainty,
    Adaptive,
}

impl AccVariant {
    pub const ALL: [AccVariant; 3] = [
        Self::TrueUncertainty,
        Self::IgnoreUncertainty,
        Self::Adaptive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::TrueUncertainty => "true-uncertainty",
            Self::IgnoreUncertainty => "ignore-uncertainty",
            Self::Adaptive => "adaptive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ACC variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccScenarioConfig {
    pub params: AccParams,
    pub x0: Vector,
    pub duration: f64,
    /// QP period, s.
    pub t_qp: f64,
    /// Adaptation period, s.
    pub t_s: f64,
    /// Integration steps per adaptation period.
    pub substeps: usize,
    pub a: f64,
    pub c1: f64,
    pub p_slack: f64,
    pub beta_margin: f64,
    /// Replaces the derived bounds when set.
    pub bounds: Option<UncertaintyBounds>,
}

impl Default for AccScenarioConfig {
    fn default() -> Self {
        Self {
            params: AccParams::default(),
            x0: Vector::from_column_slice(&AccParams::X0),
            duration: 30.0,
            t_qp: 0.05,
            t_s: 1e-3,
            substeps: 5,
            a: 1.0,
            c1: 5.0,
            p_slack: 100.0,
            beta_margin: 2.0,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

impl QpStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
        }
    }
}

/// One row per QP tick.
#[derive(Debug, Clone, PartialEq)]
pub struct AccSample {
    pub t: f64,
    pub x: Vector,
    pub u: f64,
    pub h: f64,
    pub v: f64,
    /// Uncertainty value the constraints were built from.
    pub sigma_used: f64,
    /// `v_f` component of the true uncertainty.
    pub sigma_true: f64,
    pub psi_h: f64,
    pub psi_h_active: bool,
    pub slack: f64,
    pub status: QpStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccTrajectory {
    pub variant: AccVariant,
    pub samples: Vec<AccSample>,
    pub bounds: UncertaintyBounds,
    /// `γ` used in the constraints (0 for the non-adaptive variants).
    pub gamma: f64,
    /// Minimum of `h` over every integration step.
    pub min_h: f64,
    /// `sup_{t ≥ T_s} ‖σ̂(t) − Δ(t, x(t))‖`, adaptive variant only.
    pub estimate_error_sup: Option<f64>,
    pub infeasible_steps: usize,
    pub final_state: Vector,
}

fn ratio(a: f64, b: f64, what: &str) -> Result<usize> {
    let r = a / b;
    let n = r.round();
    if !(n >= 1.0) || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Config(format!(
            "{what}: {a} is not a positive integer multiple of {b}"
        )));
    }
    Ok(n as usize)
}

pub fn run_acc_scenario(variant: AccVariant, cfg: &AccScenarioConfig) -> Result<AccTrajectory> {
    if cfg.substeps == 0 {
        return Err(Error::Config("substeps must be at least 1".into()));
    }
    let p = cfg.params;
    let nominal = AccPlant::nominal(p);
    let bounds = match cfg.bounds {
        Some(b) => UncertaintyBounds {
            gamma: compute_gamma(&b, cfg.a, cfg.t_s),
            ..b
        },
        None => acc_bounds(&p, cfg.beta_margin, cfg.a, cfg.t_s)?,
    };
    let dt = cfg.t_s / cfg.substeps as f64;
    let steps_per_qp = ratio(cfg.t_qp, cfg.t_s, "QP period")? * cfg.substeps;
    let total = (cfg.duration / dt).round() as usize;
    let clf = acc_clf(&p, cfg.c1);
    let cbf = acc_cbf(&p);
    let weights = QpWeights {
        h_weight: Matrix::from_element(1, 1, 1.0 / (p.m * p.m)),
        p_slack: cfg.p_slack,
    };
    let input_bounds = nominal.input_bounds().clone();
    let mut l1 = match variant {
        AccVariant::Adaptive => Some(L1Controller::new(
            L1Params::uniform(cfg.a, cfg.t_s, 1.0, 1)?,
            &cfg.x0,
            1,
        )?),
        _ => None,
    };
    let gamma = if l1.is_some() { bounds.gamma } else { 0.0 };

    let mut x = cfg.x0.clone();
    let mut u = Vector::zeros(1);
    let mut samples = Vec::with_capacity(total / steps_per_qp + 1);
    let mut min_h = f64::INFINITY;
    let mut err_sup: Option<f64> = None;
    let mut infeasible = 0;
    for k in 0..total {
        let t = k as f64 * dt;
        let truth = p.uncertainty(t, &x);
        min_h = min_h.min(nominal.barrier(&x));
        if let Some(l1) = &l1 {
            if k >= cfg.substeps {
                let e = (&l1.state().sigma_hat - &truth).norm();
                err_sup = Some(err_sup.map_or(e, |s: f64| s.max(e)));
            }
        }
        if k % steps_per_qp == 0 {
            let sigma = match (&l1, variant) {
                (Some(l1), _) => l1.state().sigma_hat.clone(),
                (None, AccVariant::TrueUncertainty) => truth.clone(),
                _ => Vector::zeros(3),
            };
            let (status, slack, active) = match solve_ad_clbf_qp(
                &clf,
                &cbf,
                &weights,
                &nominal,
                &x,
                &sigma,
                gamma,
                &input_bounds,
            ) {
                Ok(sol) => {
                    u = sol.u;
                    (QpStatus::Optimal, sol.slack, sol.cbf_active)
                }
                Err(Error::Infeasible { .. }) => {
                    infeasible += 1;
                    u = cbf_fallback_input(&cbf, &nominal, &x, &input_bounds);
                    (QpStatus::Infeasible, f64::NAN, true)
                }
                Err(e) => return Err(e),
            };
            samples.push(AccSample {
                t,
                x: x.clone(),
                u: u[0],
                h: nominal.barrier(&x),
                v: nominal.lyapunov(&x),
                sigma_used: sigma[1],
                sigma_true: truth[1],
                psi_h: psi_h(&cbf, &nominal, &x, &u, &sigma, gamma),
                psi_h_active: active,
                slack,
                status,
            });
        }
        let u_now = u[0];
        let next = rk4_step(
            |tt, xx, _| Ok(acc_derivative(&p, tt, xx, u_now)),
            t,
            &x,
            &u,
            dt,
        )?;
        if let Some(l1) = &mut l1 {
            l1.predictor_step_between(&nominal, &x, &next, &u, dt)
                .map_err(|_| Error::ControllerDiverged { t })?;
            if (k + 1) % cfg.substeps == 0 {
                l1.adaptive_update(&next)?;
            }
        }
        x = next;
    }
    min_h = min_h.min(nominal.barrier(&x));
    Ok(AccTrajectory {
        variant,
        samples,
        bounds,
        gamma,
        min_h,
        estimate_error_sup: err_sup,
        infeasible_steps: infeasible,
        final_state: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safe::psi_v;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn literal_constants() {
        let p = AccParams::default();
        let b = acc_build_constants(&p, 2.0, AccPlant::V_MAX).unwrap();
        assert_abs_diff_eq!(b.b_gtil, 6.0606e-4, epsilon = 1e-8);
        assert_abs_diff_eq!(b.l_u, 129_492.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b.l_t, 2.4656, epsilon = 1e-4);
        assert_abs_diff_eq!(b.l_ftil, 54.444, epsilon = 1e-3);
        assert_eq!(b.l_gtil, 0.0);
        assert!(acc_build_constants(&p, 0.5, AccPlant::V_MAX).is_err());
    }

    #[test]
    fn derived_bounds() {
        let b = acc_bounds(&AccParams::default(), 2.0, 1.0, 1e-3).unwrap();
        let x_max = (2.0 * AccPlant::V_MAX * AccPlant::V_MAX + 100.0 * 100.0).sqrt();
        let theta = 54.444 / 1650.0 * x_max + 0.2 * 9.81 * 2.0 + 0.4 * 9.81;
        assert_abs_diff_eq!(b.theta, theta, epsilon = 1e-3);
        assert!(b.gamma > 0.16 && b.gamma < 0.19, "{}", b.gamma);
    }

    #[test]
    fn psi_examples() {
        let p = AccParams::default();
        let model = AccPlant::nominal(p);
        let clf = acc_clf(&p, 5.0);
        let cbf = acc_cbf(&p);
        let u = v(&[0.0]);
        let sigma = v(&[0.0, -0.1, 0.0]);
        assert_eq!(
            psi_v(&clf, &model, &v(&[18.0, 22.0, 80.0]), &u, &sigma, 0.172),
            0.0
        );
        let x = v(&AccParams::X0);
        assert_abs_diff_eq!(
            psi_h(&cbf, &model, &x, &u, &Vector::zeros(3), 0.0),
            6.0,
            epsilon = 1e-12
        );
        let drop = psi_h(&cbf, &model, &x, &u, &Vector::zeros(3), 0.0)
            - psi_h(&cbf, &model, &x, &u, &Vector::zeros(3), 0.3);
        assert_abs_diff_eq!(drop, (1.0f64 + 1.8 * 1.8).sqrt() * 0.3, epsilon = 1e-12);
    }

    #[test]
    fn variant_names_round_trip() {
        for var in AccVariant::ALL {
            assert_eq!(AccVariant::parse(var.name()).unwrap(), var);
        }
        assert!(AccVariant::parse("oracle").is_err());
    }

    #[test]
    fn short_oracle_run_is_safe() {
        let cfg = AccScenarioConfig {
            duration: 2.0,
            ..AccScenarioConfig::default()
        };
        let traj = run_acc_scenario(AccVariant::TrueUncertainty, &cfg).unwrap();
        assert_eq!(traj.samples.len(), 40);
        assert!(traj.min_h >= 0.0);
        assert!(traj.estimate_error_sup.is_none());
    }
}
