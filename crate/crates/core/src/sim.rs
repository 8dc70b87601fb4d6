//! Fixed-step, multirate closed-loop simulation of a true plant under a
//! nominal policy with optional L1 augmentation.
//!
//! Time is always `k · dt_int` for integer `k`; control and adaptation ticks
//! are integer multiples of the integration step.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{nominal_derivative, perturbed_derivative, ControlAffine, PerturbationSpec};
use crate::error::{check_dim, Error, Result};
use crate::integrate::rk4_step;
use crate::l1::{L1Controller, L1Params};
use crate::policy::Policy;
use crate::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Integration step; `None` selects `min(t_adapt, 1 ms) / 5`.
    pub dt_int: Option<f64>,
    pub t_ctrl: f64,
    /// Adaptation period `T_s`; must not exceed `t_ctrl`.
    pub t_adapt: f64,
    pub duration: f64,
    pub seed: u64,
    pub clamp_inputs: bool,
}

/// Integer step counts derived from a validated [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateLayout {
    pub steps_per_ctrl: usize,
    pub steps_per_adapt: usize,
    pub total_steps: usize,
}

fn integer_ratio(what: &str, period: f64, dt: f64) -> Result<usize> {
    let r = period / dt;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-6 * k.max(1.0) {
        return Err(Error::Config(format!(
            "{what} {period} is not an integer multiple of the integration step {dt}"
        )));
    }
    Ok(k as usize)
}

impl SimConfig {
    pub fn new(t_ctrl: f64, t_adapt: f64, duration: f64) -> Self {
        Self {
            dt_int: None,
            t_ctrl,
            t_adapt,
            duration,
            seed: 0,
            clamp_inputs: true,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt_int.unwrap_or_else(|| self.t_adapt.min(1e-3) / 5.0)
    }

    pub fn layout(&self) -> Result<RateLayout> {
        let dt = self.dt();
        for (name, v) in [
            ("dt_int", dt),
            ("t_ctrl", self.t_ctrl),
            ("t_adapt", self.t_adapt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        if self.t_adapt > self.t_ctrl * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "adaptation period {} exceeds control period {}",
                self.t_adapt, self.t_ctrl
            )));
        }
        let steps_per_ctrl = integer_ratio("t_ctrl", self.t_ctrl, dt)?;
        let steps_per_adapt = integer_ratio("t_adapt", self.t_adapt, dt)?;
        let total_steps = (self.duration / dt).round() as usize;
        Ok(RateLayout {
            steps_per_ctrl,
            steps_per_adapt,
            total_steps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureKind {
    SimulationDiverged,
    ControllerDiverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Failure {
    pub t: f64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub scenario_id: String,
    pub seed: u64,
    pub perturbation: String,
}

/// One episode. Control-rate series share `times`; adaptation-rate series
/// share `adapt_times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub u_rl: Vec<Vector>,
    pub u_l1: Vec<Vector>,
    pub u_total: Vec<Vector>,
    pub adapt_times: Vec<f64>,
    pub sigma_hat: Vec<Vector>,
    pub sigma_m: Vec<Vector>,
    pub sigma_um: Vec<Vector>,
    pub sigma_true: Vec<Vector>,
    /// Per control step; filled by [`Trajectory::fill_rewards`].
    pub rewards: Vec<f64>,
    /// `sup ‖σ̂(t) − σ(t)‖` over integration steps with `t ≥ T_s`.
    pub estimate_error_sup: Option<f64>,
    pub final_time: f64,
    pub final_state: Vector,
    pub expected_ctrl_steps: usize,
    pub failure: Option<Failure>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    fn new(x0: &Vector, expected_ctrl_steps: usize) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            u_rl: Vec::new(),
            u_l1: Vec::new(),
            u_total: Vec::new(),
            adapt_times: Vec::new(),
            sigma_hat: Vec::new(),
            sigma_m: Vec::new(),
            sigma_um: Vec::new(),
            sigma_true: Vec::new(),
            rewards: Vec::new(),
            estimate_error_sup: None,
            final_time: 0.0,
            final_state: x0.clone(),
            expected_ctrl_steps,
            failure: None,
            meta: TrajectoryMeta::default(),
        }
    }

    pub fn fill_rewards(&mut self, reward: impl Fn(&Vector) -> f64) {
        self.rewards = self.states.iter().map(reward).collect();
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Most recent adaptation-rate sample at or before `t` (index into the
    /// adaptation series).
    pub fn adapt_index_at(&self, t: f64) -> Option<usize> {
        let idx = self.adapt_times.partition_point(|&s| s <= t + 1e-12);
        idx.checked_sub(1)
    }

    /// `sup_t ‖x(t) − reference(t)‖∞` over control ticks.
    pub fn max_deviation(&self, reference: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(reference.states.iter())
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

/// Everything a closed-loop episode needs.
pub struct Episode<'a> {
    /// Plant with parameter overrides already applied.
    pub true_plant: &'a dyn ControlAffine,
    pub perturbation: &'a PerturbationSpec,
    /// Model used by the L1 predictor.
    pub nominal: &'a dyn ControlAffine,
    pub policy: &'a dyn Policy,
    pub l1: Option<L1Params>,
    pub x0: Vector,
}

/// Runs one episode.
///
/// Per control tick: `u_L1` from the filter, `u_rl = π(t, x)`,
/// `u = clamp(u_rl + u_L1)`. Per integration step: RK4 of the true plant
/// under the held `u`, then the predictor over the same step with the
/// measured state interpolated between the step endpoints. Per adaptation
/// boundary: adaptive law and decomposition. The ground-truth `σ` is only
/// recorded, never fed back.
///
/// Divergence ends the episode early and is recorded in
/// [`Trajectory::failure`]; configuration problems are returned as errors.
pub fn run_episode(ep: &Episode<'_>, cfg: &SimConfig) -> Result<Trajectory> {
    let layout = cfg.layout()?;
    let (n, m) = (ep.nominal.state_dim(), ep.nominal.input_dim());
    check_dim("true plant state", n, ep.true_plant.state_dim())?;
    check_dim("true plant input", m, ep.true_plant.input_dim())?;
    check_dim("initial state", n, ep.x0.len())?;
    check_dim("policy output", m, ep.policy.input_dim())?;
    let dt = cfg.dt();
    let mut ctl = match &ep.l1 {
        Some(p) => Some(L1Controller::new(p.clone(), &ep.x0, m)?),
        None => None,
    };
    let expected_ctrl = layout.total_steps.div_ceil(layout.steps_per_ctrl);
    let mut traj = Trajectory::new(&ep.x0, expected_ctrl);
    traj.meta.seed = cfg.seed;

    let bounds = ep.true_plant.input_bounds();
    let true_rhs = |t: f64, x: &Vector, u: &Vector| {
        perturbed_derivative(ep.true_plant, ep.perturbation, t, x, u)
    };
    let sigma_truth = |t: f64, x: &Vector, u: &Vector| -> Result<Vector> {
        Ok(true_rhs(t, x, u)? - nominal_derivative(ep.nominal, x, u)?)
    };

    let mut x = ep.x0.clone();
    let mut u_total = Vector::zeros(m);
    let mut err_sup: Option<f64> = None;
    let mut t = 0.0;
    for k in 0..layout.total_steps {
        t = k as f64 * dt;
        if k % layout.steps_per_ctrl == 0 {
            let u_l1 = match ctl.as_mut() {
                Some(c) => c.filter_step(cfg.t_ctrl).clone(),
                None => Vector::zeros(m),
            };
            let u_rl = ep.policy.eval(t, &x);
            check_dim("policy output", m, u_rl.len())?;
            let raw = &u_rl + &u_l1;
            u_total = if cfg.clamp_inputs {
                bounds.clamp(&raw)
            } else {
                raw
            };
            if u_total.iter().any(|v| !v.is_finite()) {
                traj.failure = Some(Failure {
                    t,
                    kind: FailureKind::ControllerDiverged,
                });
                break;
            }
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.u_rl.push(u_rl);
            traj.u_l1.push(u_l1);
            traj.u_total.push(u_total.clone());
        }

        if let Some(c) = ctl.as_ref() {
            if k >= layout.steps_per_adapt {
                let e = (&c.state().sigma_hat - sigma_truth(t, &x, &u_total)?).norm();
                err_sup = Some(err_sup.map_or(e, |s: f64| s.max(e)));
            }
        }

        let x_next = match rk4_step(true_rhs, t, &x, &u_total, dt) {
            Ok(v) => v,
            Err(Error::SimulationDiverged { .. }) => {
                traj.failure = Some(Failure {
                    t,
                    kind: FailureKind::SimulationDiverged,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        let t_next = (k + 1) as f64 * dt;

        if let Some(c) = ctl.as_mut() {
            let stepped = c.predictor_step_between(ep.nominal, &x, &x_next, &u_total, dt);
            let boundary = (k + 1) % layout.steps_per_adapt == 0;
            let updated = stepped.and_then(|_| {
                if boundary {
                    c.adaptive_update(&x_next)?;
                    c.decompose(ep.nominal, &x_next)?;
                }
                Ok(())
            });
            match updated {
                Ok(()) => {}
                Err(Error::ControllerDiverged { .. }) | Err(Error::SingularGeometry(_)) => {
                    traj.failure = Some(Failure {
                        t: t_next,
                        kind: FailureKind::ControllerDiverged,
                    });
                    x = x_next;
                    t = t_next;
                    break;
                }
                Err(e) => return Err(e),
            }
            if boundary {
                let s = c.state();
                traj.adapt_times.push(t_next);
                traj.sigma_hat.push(s.sigma_hat.clone());
                traj.sigma_m.push(s.sigma_m.clone());
                traj.sigma_um.push(s.sigma_um.clone());
                traj.sigma_true
                    .push(sigma_truth(t_next, &x_next, &u_total)?);
            }
        }
        x = x_next;
        t = t_next;
    }
    traj.final_time = t;
    traj.final_state = x;
    traj.estimate_error_sup = err_sup;
    Ok(traj)
}
