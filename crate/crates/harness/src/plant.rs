//! Plant construction, rewards and baseline policies for each supported
//! plant name.

use std::sync::Arc;

use adaug_core::ddp::{self, ContinuousFn, DdpSolution, Dynamics, OcProblem};
use adaug_core::dynamics::{ControlAffine, InputBounds, PerturbationSpec};
use adaug_core::plants::{
    pendubot_reward_about, CartPole, Pendubot, PendubotParams, Quadrotor, PENDUBOT_WORST_REWARD,
};
use adaug_core::policy::{lqr_policy, Policy};
use adaug_core::{Matrix, Vector};

use crate::config::{DdpSection, PlantName, PolicySpec, ScenarioConfig};
use crate::error::{HarnessError, Result};
use crate::jsonio;
use crate::scenarios::{Scenario, Wind};

/// Equilibrium residual accepted when synthesizing LQR policies.
const EQ_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub enum Plant {
    Pendubot(Pendubot),
    CartPole(CartPole),
    Quadrotor(Quadrotor),
}

fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(v))
}

impl Plant {
    /// Nominal plant for `cfg`, with the configured input limit.
    pub fn nominal(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(match cfg.plant {
            PlantName::Pendubot => {
                let mut p = PendubotParams::default();
                if let Some(l) = cfg.input_limit {
                    p.input_limit = l;
                }
                Self::Pendubot(Pendubot::new(p))
            }
            PlantName::Cartpole => {
                let c = CartPole::default();
                Self::CartPole(match cfg.input_limit {
                    Some(l) => c.with_bounds(InputBounds::symmetric(&[l])?),
                    None => c,
                })
            }
            PlantName::Quadrotor => Self::Quadrotor(Quadrotor::default()),
        })
    }

    pub fn name(&self) -> PlantName {
        match self {
            Self::Pendubot(_) => PlantName::Pendubot,
            Self::CartPole(_) => PlantName::Cartpole,
            Self::Quadrotor(_) => PlantName::Quadrotor,
        }
    }

    pub fn with_overrides(
        &self,
        overrides: &std::collections::BTreeMap<String, f64>,
    ) -> Result<Self> {
        Ok(match self {
            Self::Pendubot(p) => Self::Pendubot(p.with_overrides(overrides)?),
            Self::CartPole(p) => Self::CartPole(p.with_overrides(overrides)?),
            Self::Quadrotor(p) => Self::Quadrotor(p.with_overrides(overrides)?),
        })
    }

    pub fn model(&self) -> &dyn ControlAffine {
        match self {
            Self::Pendubot(p) => p,
            Self::CartPole(p) => p,
            Self::Quadrotor(p) => p,
        }
    }

    /// Regulation target and the input holding it.
    pub fn equilibrium(&self) -> (Vector, Vector) {
        match self {
            Self::Pendubot(_) => (
                Vector::from_column_slice(&Pendubot::UPRIGHT),
                Vector::zeros(1),
            ),
            Self::CartPole(_) => (
                Vector::from_column_slice(&[0.0, 0.0, 0.0, std::f64::consts::PI]),
                Vector::zeros(1),
            ),
            Self::Quadrotor(q) => (Vector::zeros(12), q.hover_input()),
        }
    }

    /// State components compared against the target for tracking errors:
    /// joint angles for the arms, position for the quadrotor.
    pub fn tracked(&self) -> Vec<usize> {
        match self {
            Self::Pendubot(_) => vec![0, 1],
            Self::CartPole(_) => vec![0, 3],
            Self::Quadrotor(_) => vec![0, 1, 2],
        }
    }

    pub fn default_lqr_weights(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Pendubot(_) => (vec![1.0; 4], vec![10.0]),
            Self::CartPole(_) => (vec![10.0, 1.0, 1.0, 10.0], vec![0.1]),
            Self::Quadrotor(_) => (vec![1.0; 12], vec![0.1, 1.0, 1.0, 1.0]),
        }
    }

    /// Worst possible per-step reward.
    pub fn worst_reward(&self) -> f64 {
        match self {
            Self::Pendubot(_) => PENDUBOT_WORST_REWARD,
            Self::CartPole(_) => -2.0,
            Self::Quadrotor(_) => -QUAD_REWARD_CAP,
        }
    }

    /// Per-step reward relative to `target`, bounded below by
    /// [`Plant::worst_reward`]. Pendubot: the shifted swing-up reward;
    /// cart-pole: `cos(θ − θ*) − 1`; quadrotor: negative position error,
    /// capped.
    pub fn reward(&self, x: &Vector, target: &Vector) -> f64 {
        match self {
            Self::Pendubot(_) => pendubot_reward_about(x, target),
            Self::CartPole(_) => (x[3] - target[3]).cos() - 1.0,
            Self::Quadrotor(_) => -(x.rows(0, 3) - target.rows(0, 3))
                .norm()
                .min(QUAD_REWARD_CAP),
        }
    }

    /// Perturbation acting on the true plant for `scenario`: a uniform input
    /// gain plus, for the quadrotor, the wind force on the horizontal
    /// velocity channels.
    pub fn perturbation(
        &self,
        scenario: &Scenario,
        true_plant: &Plant,
    ) -> Result<PerturbationSpec> {
        let m = self.model().input_dim();
        let mut spec = if scenario.lambda == 1.0 {
            PerturbationSpec::identity(m)
        } else {
            PerturbationSpec::input_gain_scale(m, scenario.lambda)?
        };
        if let Some(wind) = &scenario.wind {
            let mass = match true_plant {
                Self::Quadrotor(q) => q.params.m,
                _ => {
                    return Err(HarnessError::config(
                        "wind is only defined for the quadrotor",
                    ))
                }
            };
            spec = spec.with_shared_disturbance(wind_disturbance(wind.clone(), mass));
        }
        Ok(spec)
    }
}

pub const QUAD_REWARD_CAP: f64 = 10.0;

/// `d(t, x)` adding `F/m` to `ẍ` and `ÿ`.
pub fn wind_disturbance(wind: Wind, mass: f64) -> adaug_core::dynamics::DisturbanceFn {
    Arc::new(move |t: f64, x: &Vector| {
        let f = wind.force(t);
        let mut d = Vector::zeros(x.len());
        d[3] = f[0] / mass;
        d[4] = f[1] / mass;
        d
    })
}

/// Quadrotor navigation problem from the origin to `section.target`, over
/// the nominal continuous dynamics.
pub fn quadrotor_problem(quad: &Quadrotor, section: &DdpSection) -> Result<OcProblem> {
    section.validate()?;
    let q = quad.clone();
    let field: ContinuousFn =
        Arc::new(move |x: &Vector, u: &Vector| q.drift(x) + q.input_gain(x) * u);
    let mut target = Vector::zeros(12);
    target.rows_mut(0, 3).copy_from_slice(&section.target);
    let problem = OcProblem {
        dynamics: Dynamics::Continuous {
            field,
            substeps: section.substeps,
        },
        n: 12,
        m: 4,
        horizon: section.horizon,
        dt: section.dt,
        x0: Vector::zeros(12),
        x_target: target,
        u_ref: quad.hover_input(),
        p_stage: diag(&section.p_stage),
        p_final: diag(&section.p_final),
        q_input: diag(&section.q_input),
    };
    problem.validate()?;
    Ok(problem)
}

/// Solves the quadrotor problem from a hover initial guess.
pub fn solve_quadrotor(quad: &Quadrotor, section: &DdpSection) -> Result<(OcProblem, DdpSolution)> {
    let problem = quadrotor_problem(quad, section)?;
    let u_init = vec![quad.hover_input(); section.horizon];
    let sol = ddp::solve(&problem, &u_init, section.max_iters, section.tol)?;
    Ok((problem, sol))
}

/// Baseline policy for `cfg` on the nominal plant.
pub fn build_policy(cfg: &ScenarioConfig, nominal: &Plant) -> Result<Box<dyn Policy>> {
    let (x_eq, u_eq) = nominal.equilibrium();
    match cfg.policy_spec()? {
        PolicySpec::Lqr => {
            let (dq, dr) = nominal.default_lqr_weights();
            let q = cfg.lqr.q.clone().unwrap_or(dq);
            let r = cfg.lqr.r.clone().unwrap_or(dr);
            let (n, m) = (nominal.model().state_dim(), nominal.model().input_dim());
            if q.len() != n || r.len() != m {
                return Err(HarnessError::config(format!(
                    "lqr weights need {n} state and {m} input entries, got {} and {}",
                    q.len(),
                    r.len()
                )));
            }
            Ok(Box::new(lqr_policy(
                nominal.model(),
                &x_eq,
                &u_eq,
                &diag(&q),
                &diag(&r),
                EQ_TOL,
            )?))
        }
        PolicySpec::Ddp(path) => {
            let Plant::Quadrotor(quad) = nominal else {
                return Err(HarnessError::config(
                    "the ddp policy is only defined for the quadrotor",
                ));
            };
            let problem = quadrotor_problem(quad, &cfg.ddp)?;
            let solution = match path {
                Some(p) => jsonio::load_ddp_solution(&p)?,
                None => solve_quadrotor(quad, &cfg.ddp)?.1,
            };
            Ok(Box::new(ddp::ddp_policy(
                solution,
                Some(&problem),
                quad.hover_input(),
            )?))
        }
        PolicySpec::Mlp(path) => {
            let mlp = jsonio::load_mlp(&path)?;
            let n = nominal.model().state_dim();
            if mlp.state_dim() != n || mlp.input_dim() != nominal.model().input_dim() {
                return Err(HarnessError::config(format!(
                    "{}: network shape does not match the {} plant",
                    path.display(),
                    nominal.name().as_str()
                )));
            }
            Ok(Box::new(mlp))
        }
    }
}

/// Initial state: the equilibrium plus the configured offset.
pub fn initial_state(cfg: &ScenarioConfig, nominal: &Plant) -> Result<Vector> {
    let (x_eq, _) = nominal.equilibrium();
    let x0 = match nominal {
        Plant::Quadrotor(_) => Vector::zeros(12),
        _ => x_eq,
    };
    match &cfg.x0_offset {
        None => Ok(x0),
        Some(off) if off.len() == x0.len() => Ok(x0 + Vector::from_column_slice(off)),
        Some(off) => Err(HarnessError::config(format!(
            "x0_offset needs {} entries, got {}",
            x0.len(),
            off.len()
        ))),
    }
}

/// Target the rewards and tracking errors refer to.
pub fn target_state(cfg: &ScenarioConfig, nominal: &Plant) -> Vector {
    match nominal {
        Plant::Quadrotor(_) => {
            let mut t = Vector::zeros(12);
            t.rows_mut(0, 3).copy_from_slice(&cfg.ddp.target);
            t
        }
        _ => nominal.equilibrium().0,
    }
}
