//! Discrete-time DDP in its iLQR form (first-order dynamics expansion).
//!
//! Cost: `½ Σ_{k<N} (X_kᵀ P X_k + U_kᵀ Q U_k) + ½ X_Nᵀ P_N X_N` with
//! `X_k = x_k − x_target` and `U_k = u_k − u_ref`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, Error, Result};
use crate::linalg::jacobian;
use crate::policy::Policy;
use crate::{Matrix, Vector};

/// Line-search steps `α = 2^{-i}`, `i = 0..=10`.
pub const LINE_SEARCH_STEPS: usize = 11;
/// Armijo acceptance ratio of actual to expected decrease.
pub const ARMIJO: f64 = 0.1;
pub const MU_MIN: f64 = 1e-6;
pub const MU_MAX: f64 = 1e10;

pub type DiscreteFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
pub type ContinuousFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// Discrete dynamics, either given directly or as a continuous vector field
/// integrated by RK4 with `substeps` equal steps per `dt`.
#[derive(Clone)]
pub enum Dynamics {
    Discrete(DiscreteFn),
    Continuous {
        field: ContinuousFn,
        substeps: usize,
    },
}

fn rk4(field: &ContinuousFn, x: &Vector, u: &Vector, h: f64) -> Vector {
    let k1 = field(x, u);
    let k2 = field(&(x + &k1 * (0.5 * h)), u);
    let k3 = field(&(x + &k2 * (0.5 * h)), u);
    let k4 = field(&(x + &k3 * h), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

#[derive(Clone)]
pub struct OcProblem {
    pub dynamics: Dynamics,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub dt: f64,
    pub x0: Vector,
    pub x_target: Vector,
    pub u_ref: Vector,
    pub p_stage: Matrix,
    pub p_final: Matrix,
    pub q_input: Matrix,
}

impl OcProblem {
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        check_dim("x0", n, self.x0.len())?;
        check_dim("x_target", n, self.x_target.len())?;
        check_dim("u_ref", m, self.u_ref.len())?;
        check_dim("P", n, self.p_stage.nrows())?;
        check_dim("P_N", n, self.p_final.nrows())?;
        check_dim("Q", m, self.q_input.nrows())?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.q_input.clone().cholesky().is_none() {
            return Err(Error::Config(
                "input weight Q must be positive definite".into(),
            ));
        }
        if let Dynamics::Continuous { substeps: 0, .. } = self.dynamics {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        Ok(())
    }

    /// `x⁺ = F(x, u)` over one step `dt`.
    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        self.advance(x, u, self.dt)
    }

    /// Integrates the dynamics over `tau ≤ dt` with `u` held. For discrete
    /// dynamics only `tau = dt` and `tau = 0` are meaningful.
    pub fn advance(&self, x: &Vector, u: &Vector, tau: f64) -> Vector {
        match &self.dynamics {
            Dynamics::Discrete(f) => {
                if tau <= 0.0 {
                    x.clone()
                } else {
                    f(x, u)
                }
            }
            Dynamics::Continuous { field, substeps } => {
                let h = self.dt / *substeps as f64;
                let full = ((tau / h) + 1e-9).floor() as usize;
                let mut y = x.clone();
                for _ in 0..full.min(*substeps) {
                    y = rk4(field, &y, u, h);
                }
                let rest = tau - full as f64 * h;
                if rest > 1e-12 * self.dt {
                    y = rk4(field, &y, u, rest);
                }
                y
            }
        }
    }

    pub fn stage_cost(&self, x: &Vector, u: &Vector) -> f64 {
        let dx = x - &self.x_target;
        let du = u - &self.u_ref;
        0.5 * (dx.dot(&(&self.p_stage * &dx)) + du.dot(&(&self.q_input * &du)))
    }

    pub fn final_cost(&self, x: &Vector) -> f64 {
        let dx = x - &self.x_target;
        0.5 * dx.dot(&(&self.p_final * &dx))
    }

    pub fn rollout(&self, u: &[Vector]) -> Vec<Vector> {
        let mut xs = Vec::with_capacity(u.len() + 1);
        xs.push(self.x0.clone());
        for uk in u {
            let next = self.step(xs.last().expect("non-empty"), uk);
            xs.push(next);
        }
        xs
    }

    pub fn cost(&self, x: &[Vector], u: &[Vector]) -> f64 {
        let running: f64 = x
            .iter()
            .zip(u.iter())
            .map(|(xk, uk)| self.stage_cost(xk, uk))
            .sum();
        running + self.final_cost(x.last().expect("non-empty trajectory"))
    }

    /// `(∂F/∂x, ∂F/∂u)` by central differences.
    pub fn linearize(&self, x: &Vector, u: &Vector) -> (Matrix, Matrix) {
        let a = jacobian(|xx| self.step(xx, u), x);
        let b = jacobian(|uu| self.step(x, uu), u);
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    pub gains: Vec<Matrix>,
    pub ff: Vec<Vector>,
    /// `(Σ kᵀQ_u, Σ ½ kᵀQ_uu k)`; a step `α` is expected to decrease the
    /// cost by `−(α·d1 + α²·d2)`.
    pub expected: (f64, f64),
}

impl BackwardPass {
    pub fn expected_decrease(&self, alpha: f64) -> f64 {
        -(alpha * self.expected.0 + alpha * alpha * self.expected.1)
    }
}

/// Riccati-like value recursion around `(x, u)` with `Q_uu + μI`.
pub fn backward_pass(
    problem: &OcProblem,
    x: &[Vector],
    u: &[Vector],
    mu: f64,
) -> Result<BackwardPass> {
    let big_n = problem.horizon;
    let mut v_x = &problem.p_final * (&x[big_n] - &problem.x_target);
    let mut v_xx = problem.p_final.clone();
    let mut gains = alloc::vec![Matrix::zeros(problem.m, problem.n); big_n];
    let mut ff = alloc::vec![Vector::zeros(problem.m); big_n];
    let (mut d1, mut d2) = (0.0, 0.0);
    for k in (0..big_n).rev() {
        let (a, b) = problem.linearize(&x[k], &u[k]);
        let q_x = &problem.p_stage * (&x[k] - &problem.x_target) + a.transpose() * &v_x;
        let q_u = &problem.q_input * (&u[k] - &problem.u_ref) + b.transpose() * &v_x;
        let q_xx = &problem.p_stage + a.transpose() * &v_xx * &a;
        let q_uu = &problem.q_input + b.transpose() * &v_xx * &b;
        let q_ux = b.transpose() * &v_xx * &a;
        let reg = &q_uu + Matrix::identity(problem.m, problem.m) * mu;
        let chol = reg
            .cholesky()
            .ok_or(Error::RegularizationFailure { step: k, mu })?;
        let kk = -chol.solve(&q_ux);
        let k_ff = -chol.solve(&q_u);
        d1 += k_ff.dot(&q_u);
        d2 += 0.5 * k_ff.dot(&(&q_uu * &k_ff));
        v_x = &q_x
            + kk.transpose() * &q_uu * &k_ff
            + kk.transpose() * &q_u
            + q_ux.transpose() * &k_ff;
        let vxx =
            &q_xx + kk.transpose() * &q_uu * &kk + kk.transpose() * &q_ux + q_ux.transpose() * &kk;
        v_xx = (&vxx + vxx.transpose()) * 0.5;
        gains[k] = kk;
        ff[k] = k_ff;
    }
    Ok(BackwardPass {
        gains,
        ff,
        expected: (d1, d2),
    })
}

/// Rollout `u = u_nom + α·k_ff + K (x − x_nom)`; returns `(x, u, cost)`.
pub fn forward_pass(
    problem: &OcProblem,
    x_nom: &[Vector],
    u_nom: &[Vector],
    bp: &BackwardPass,
    alpha: f64,
) -> (Vec<Vector>, Vec<Vector>, f64) {
    let mut xs = Vec::with_capacity(x_nom.len());
    let mut us = Vec::with_capacity(u_nom.len());
    xs.push(problem.x0.clone());
    for k in 0..problem.horizon {
        let dx = &xs[k] - &x_nom[k];
        let uk = &u_nom[k] + &bp.ff[k] * alpha + &bp.gains[k] * dx;
        xs.push(problem.step(&xs[k], &uk));
        us.push(uk);
    }
    let cost = problem.cost(&xs, &us);
    (xs, us, cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpSolution {
    pub dt: f64,
    pub x_nominal: Vec<Vector>,
    pub u_nominal: Vec<Vector>,
    pub gains: Vec<Matrix>,
    pub ff: Vec<Vector>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn raise_mu(mu: f64) -> f64 {
    (mu * 2.0).max(MU_MIN)
}

fn lower_mu(mu: f64) -> f64 {
    let m = mu * 0.5;
    if m < MU_MIN {
        0.0
    } else {
        m
    }
}

/// Iterates backward/forward passes from `u_init` until the expected or
/// achieved relative decrease drops below `tol`, or `max_iters` forward
/// passes have been accepted. `iterations` counts accepted passes; the
/// returned gains come from a backward pass around the final trajectory.
pub fn solve(
    problem: &OcProblem,
    u_init: &[Vector],
    max_iters: usize,
    tol: f64,
) -> Result<DdpSolution> {
    problem.validate()?;
    check_dim("initial input sequence", problem.horizon, u_init.len())?;
    if u_init.iter().flat_map(|u| u.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Config("initial inputs must be finite".into()));
    }
    let mut u: Vec<Vector> = u_init.to_vec();
    let mut x = problem.rollout(&u);
    let mut cost = problem.cost(&x, &u);
    if !cost.is_finite() {
        return Err(Error::SolverDiverged { iteration: 0 });
    }
    let mut mu = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut guard = 0usize;
    let final_bp = loop {
        guard += 1;
        if guard > 100 * (max_iters + 1) {
            return Err(Error::SolverDiverged {
                iteration: iterations,
            });
        }
        let bp = match backward_pass(problem, &x, &u, mu) {
            Ok(bp) => bp,
            Err(Error::RegularizationFailure { step, .. }) => {
                mu = raise_mu(mu);
                if mu > MU_MAX {
                    return Err(Error::RegularizationFailure { step, mu });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if bp.expected_decrease(1.0) < tol * cost.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break bp;
        }
        if iterations >= max_iters {
            break bp;
        }
        let mut accepted = None;
        for i in 0..LINE_SEARCH_STEPS {
            let alpha = 0.5f64.powi(i as i32);
            let (xn, un, cn) = forward_pass(problem, &x, &u, &bp, alpha);
            if !cn.is_finite() {
                continue;
            }
            let expected = bp.expected_decrease(alpha);
            if expected > 0.0 && cost - cn >= ARMIJO * expected {
                accepted = Some((xn, un, cn));
                break;
            }
        }
        match accepted {
            Some((xn, un, cn)) => {
                let decrease = cost - cn;
                x = xn;
                u = un;
                let previous = cost;
                cost = cn;
                iterations += 1;
                mu = lower_mu(mu);
                if decrease < tol * previous.abs() {
                    converged = true;
                    let bp = backward_pass(problem, &x, &u, mu)?;
                    break bp;
                }
            }
            None => {
                mu = raise_mu(mu);
                if mu > MU_MAX {
                    return Err(Error::LineSearchFailure);
                }
            }
        }
    };
    Ok(DdpSolution {
        dt: problem.dt,
        x_nominal: x,
        u_nominal: u,
        gains: final_bp.gains,
        ff: final_bp.ff,
        cost,
        iterations,
        converged,
    })
}

/// Time-indexed DDP policy `u = u_nom[k] + K_k (x − x_ref(t))`,
/// `k = ⌊t/dt⌋`.
///
/// With continuous dynamics `x_ref(t)` integrates the nominal model from
/// `x_nom[k]` over `t − k·dt`, so the policy replays `x_nom` exactly on the
/// nominal plant at any control rate. Past the horizon it holds `u_after`
/// with the last gain about the final nominal state.
#[derive(Clone)]
pub struct DdpPolicy {
    solution: DdpSolution,
    problem: Option<OcProblem>,
    u_after: Vector,
}

impl DdpPolicy {
    pub fn solution(&self) -> &DdpSolution {
        &self.solution
    }

    fn index(&self, t: f64) -> usize {
        ((t / self.solution.dt) + 1e-9).floor().max(0.0) as usize
    }

    pub fn reference(&self, t: f64) -> Vector {
        let k = self.index(t);
        let n_steps = self.solution.u_nominal.len();
        if k >= n_steps {
            return self.solution.x_nominal[n_steps].clone();
        }
        let tau = t - k as f64 * self.solution.dt;
        match &self.problem {
            Some(p) if tau > 1e-12 => p.advance(
                &self.solution.x_nominal[k],
                &self.solution.u_nominal[k],
                tau,
            ),
            _ => self.solution.x_nominal[k].clone(),
        }
    }
}

impl Policy for DdpPolicy {
    fn input_dim(&self) -> usize {
        self.u_after.len()
    }
    fn eval(&self, t: f64, x: &Vector) -> Vector {
        let k = self.index(t);
        let n_steps = self.solution.u_nominal.len();
        if k >= n_steps {
            let last = &self.solution.gains[n_steps - 1];
            return &self.u_after + last * (x - &self.solution.x_nominal[n_steps]);
        }
        &self.solution.u_nominal[k] + &self.solution.gains[k] * (x - self.reference(t))
    }
}

/// Wraps a solution as a policy. Pass the problem to enable intra-step
/// reference integration; `u_after` is applied past the horizon.
pub fn ddp_policy(
    solution: DdpSolution,
    problem: Option<&OcProblem>,
    u_after: Vector,
) -> Result<DdpPolicy> {
    if solution.u_nominal.is_empty() || solution.x_nominal.len() != solution.u_nominal.len() + 1 {
        return Err(Error::Config("malformed DDP solution".into()));
    }
    check_dim("u_after", solution.u_nominal[0].len(), u_after.len())?;
    let problem = problem.and_then(|p| match p.dynamics {
        Dynamics::Continuous { .. } => Some(p.clone()),
        Dynamics::Discrete(_) => None,
    });
    Ok(DdpPolicy {
        solution,
        problem,
        u_after,
    })
}
