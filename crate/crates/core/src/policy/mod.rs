//! Baseline policies `u = π(t, x)`: LQR regulators, the time-indexed DDP
//! policy and a feed-forward MLP evaluator for externally trained networks.

pub mod lqr;
pub mod mlp;

pub use lqr::{lqr_policy, LqrPolicy};
pub use mlp::{Activation, DenseLayer, MlpPolicy};

use alloc::boxed::Box;

use crate::dynamics::InputBounds;
use crate::Vector;

/// A nominal control policy. Implementations are deterministic and may be
/// shared across threads; the caller clamps the output to the input box.
pub trait Policy: Send + Sync {
    fn input_dim(&self) -> usize;
    fn eval(&self, t: f64, x: &Vector) -> Vector;
    /// Lipschitz constant `l_π` if known. Informational only.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy {
    pub m: usize,
}

impl Policy for ZeroPolicy {
    fn input_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, _t: f64, _x: &Vector) -> Vector {
        Vector::zeros(self.m)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}

type PolicyFn = dyn Fn(f64, &Vector) -> Vector + Send + Sync;

/// Closure-backed policy.
pub struct FnPolicy {
    m: usize,
    f: Box<PolicyFn>,
    lipschitz: Option<f64>,
}

impl FnPolicy {
    pub fn new(m: usize, f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            m,
            f: Box::new(f),
            lipschitz: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl Policy for FnPolicy {
    fn input_dim(&self) -> usize {
        self.m
    }
    fn eval(&self, t: f64, x: &Vector) -> Vector {
        (self.f)(t, x)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// Evaluates `policy` and clamps the result to `bounds`.
pub fn eval_clamped(policy: &dyn Policy, bounds: &InputBounds, t: f64, x: &Vector) -> Vector {
    bounds.clamp(&policy.eval(t, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_policy_and_clamp() {
        let p = ZeroPolicy { m: 2 };
        assert_eq!(p.eval(1.0, &Vector::zeros(3)), Vector::zeros(2));
        let f = FnPolicy::new(1, |_, x| x * 100.0);
        let b = InputBounds::symmetric(&[4.0]).unwrap();
        let u = eval_clamped(&f, &b, 0.0, &Vector::from_element(1, -1.0));
        assert_eq!(u[0], -4.0);
    }
}
