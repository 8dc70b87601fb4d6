//! Episode scoring: accumulated and normalized reward, success predicate and
//! tracking-error norms.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::sim::Trajectory;
use crate::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    /// Worst possible per-step reward; missing steps after a failure score
    /// this value.
    pub worst_step_reward: f64,
    /// Accumulated reward of the same policy on the unperturbed plant.
    pub nominal_reward: Option<f64>,
    /// Success iff the mean reward over the final 20 % exceeds this.
    pub success_threshold: f64,
    /// Reference state and the components compared against it.
    pub target: Option<(Vector, Vec<usize>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub accumulated_reward: f64,
    /// `(R − R_min) / (R_nominal − R_min)`, clipped at 0; 1 when no nominal
    /// reference is given.
    pub normalized_reward: f64,
    pub success: bool,
    pub steps: usize,
    pub expected_steps: usize,
    pub tracking_rms: f64,
    pub tracking_max: f64,
    pub final_tracking_error: f64,
    pub failure_time: Option<f64>,
}

/// Per-step rewards over the full expected horizon, padding with the worst
/// reward after an early termination.
fn padded_rewards(traj: &Trajectory, reward: &dyn Fn(&Vector) -> f64, worst: f64) -> Vec<f64> {
    let mut r: Vec<f64> = traj.states.iter().map(reward).collect();
    if traj.failed() {
        r.resize(traj.expected_ctrl_steps.max(r.len()), worst);
    }
    r
}

pub fn normalize(accumulated: f64, nominal: f64, minimum: f64) -> f64 {
    let span = nominal - minimum;
    if span <= 0.0 {
        return if accumulated >= nominal { 1.0 } else { 0.0 };
    }
    ((accumulated - minimum) / span).max(0.0)
}

pub fn episode_metrics(
    traj: &Trajectory,
    reward: &dyn Fn(&Vector) -> f64,
    cfg: &MetricConfig,
) -> MetricSummary {
    let rewards = padded_rewards(traj, reward, cfg.worst_step_reward);
    let expected = traj.expected_ctrl_steps.max(rewards.len());
    let accumulated: f64 = rewards.iter().sum();
    let minimum = cfg.worst_step_reward * expected as f64;
    let normalized = match cfg.nominal_reward {
        Some(nominal) => normalize(accumulated, nominal, minimum),
        None => 1.0,
    };
    let tail_len = ((rewards.len() as f64) * 0.2).ceil().max(1.0) as usize;
    let tail = &rewards[rewards.len().saturating_sub(tail_len)..];
    let tail_mean = if tail.is_empty() {
        cfg.worst_step_reward
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let success = !traj.failed() && tail_mean > cfg.success_threshold;

    let (mut rms, mut max, mut fin) = (0.0, 0.0, 0.0);
    if let Some((target, idx)) = &cfg.target {
        let err = |x: &Vector| -> f64 {
            idx.iter()
                .map(|&i| (x[i] - target[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let errs: Vec<f64> = traj.states.iter().map(err).collect();
        if !errs.is_empty() {
            rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
            max = errs.iter().copied().fold(0.0, f64::max);
        }
        fin = if traj.failed() {
            f64::INFINITY
        } else {
            err(&traj.final_state)
        };
    }
    MetricSummary {
        accumulated_reward: accumulated,
        normalized_reward: normalized,
        success,
        steps: traj.states.len(),
        expected_steps: expected,
        tracking_rms: rms,
        tracking_max: max,
        final_tracking_error: fin,
        failure_time: traj.failure.map(|f| f.t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlAffineModel, PerturbationSpec};
    use crate::plants::pendubot_reward;
    use crate::policy::ZeroPolicy;
    use crate::sim::{run_episode, Episode, SimConfig};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn pinned(x: [f64; 4], steps: usize) -> Trajectory {
        let model =
            ControlAffineModel::new(4, 1, |_| Vector::zeros(4), |_| crate::Matrix::zeros(4, 1));
        let pert = PerturbationSpec::identity(1);
        let policy = ZeroPolicy { m: 1 };
        let ep = Episode {
            true_plant: &model,
            perturbation: &pert,
            nominal: &model,
            policy: &policy,
            l1: None,
            x0: Vector::from_column_slice(&x),
        };
        let traj = run_episode(&ep, &SimConfig::new(0.01, 0.01, steps as f64 * 0.01)).unwrap();
        assert_eq!(traj.states.len(), steps);
        traj
    }

    fn cfg(nominal: Option<f64>) -> MetricConfig {
        MetricConfig {
            worst_step_reward: -6.0 * (1.0 + 2f64.sqrt()),
            nominal_reward: nominal,
            success_threshold: -0.5,
            target: Some((Vector::zeros(4), vec![0, 1])),
        }
    }

    #[test]
    fn pinned_at_target_is_perfect() {
        let traj = pinned([0.0; 4], 50);
        let m = episode_metrics(&traj, &pendubot_reward, &cfg(Some(0.0)));
        assert_eq!(m.accumulated_reward, 0.0);
        assert_eq!(m.normalized_reward, 1.0);
        assert!(m.success);
        assert_eq!(m.tracking_max, 0.0);
    }

    #[test]
    fn pinned_hanging_accumulates_minus_twelve_per_step() {
        let traj = pinned([PI, PI, 0.0, 0.0], 40);
        let m = episode_metrics(&traj, &pendubot_reward, &cfg(None));
        assert_abs_diff_eq!(m.accumulated_reward, -12.0 * 40.0, epsilon = 1e-9);
        assert!(!m.success);
    }

    #[test]
    fn nominal_normalizes_to_one() {
        let traj = pinned([0.3, -0.2, 0.0, 0.0], 30);
        let r = episode_metrics(&traj, &pendubot_reward, &cfg(None)).accumulated_reward;
        let m = episode_metrics(&traj, &pendubot_reward, &cfg(Some(r)));
        assert_abs_diff_eq!(m.normalized_reward, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalization_clips_at_zero() {
        assert_eq!(normalize(-100.0, 0.0, -50.0), 0.0);
        assert_abs_diff_eq!(normalize(-25.0, 0.0, -50.0), 0.5, epsilon = 1e-15);
    }
}
