//! Control-affine plant abstraction and the perturbation model.
//!
//! A nominal plant is `ẋ = f(x) + g(x)u`. The perturbed ("true") plant is
//! `ẋ = f(x) + g(x)Λu + d(t, x)` where parameter overrides (mass scale,
//! propeller coefficients, ...) are already baked into `f` and `g` of a
//! separate true-plant instance. The nominal model handed to controllers is
//! never mutated.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Vector};

/// Smallest singular value of `g(x)` below which the input gain is treated
/// as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Box constraint `lower ≤ u ≤ upper` on the input.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBounds {
    lower: Vector,
    upper: Vector,
}

impl InputBounds {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        check_dim("input bounds", lower.len(), upper.len())?;
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::Config(format!(
                "input bound {i}: lower {} exceeds upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `-limit ≤ u ≤ limit` channelwise.
    pub fn symmetric(limits: &[f64]) -> Result<Self> {
        let upper = Vector::from_column_slice(limits);
        Self::new(-upper.clone(), upper)
    }

    pub fn unbounded(m: usize) -> Self {
        Self {
            lower: Vector::from_element(m, f64::NEG_INFINITY),
            upper: Vector::from_element(m, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn clamp(&self, u: &Vector) -> Vector {
        Vector::from_fn(u.len(), |i, _| u[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Largest Euclidean norm attained on the box (at the farthest corner).
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(lo, hi)| {
                let c = lo.abs().max(hi.abs());
                c * c
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// A plant `ẋ = f(x) + g(x)u` with known `f`, `g` and input box.
pub trait ControlAffine: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Drift `f(x)`.
    fn drift(&self, x: &Vector) -> Vector;
    /// Input gain `g(x)`, an `n × m` matrix.
    fn input_gain(&self, x: &Vector) -> Matrix;
    fn input_bounds(&self) -> &InputBounds;
    /// Bound on `‖x‖` over the admissible set; only used by the
    /// estimation-error bound calculators.
    fn state_set_bound(&self) -> f64;
}

type DriftFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type GainFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// Closure-backed control-affine model, mostly for small test plants.
pub struct ControlAffineModel {
    n: usize,
    m: usize,
    drift: Box<DriftFn>,
    gain: Box<GainFn>,
    bounds: InputBounds,
    state_set_bound: f64,
}

impl ControlAffineModel {
    pub fn new(
        n: usize,
        m: usize,
        drift: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        gain: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            drift: Box::new(drift),
            gain: Box::new(gain),
            bounds: InputBounds::unbounded(m),
            state_set_bound: 0.0,
        }
    }

    /// `ẋ = u` with `n = m = 1`.
    pub fn scalar_integrator() -> Self {
        Self::new(
            1,
            1,
            |_| Vector::zeros(1),
            |_| Matrix::from_element(1, 1, 1.0),
        )
    }

    pub fn with_bounds(mut self, bounds: InputBounds) -> Result<Self> {
        check_dim("model input bounds", self.m, bounds.dim())?;
        self.bounds = bounds;
        Ok(self)
    }

    pub fn with_state_set_bound(mut self, bound: f64) -> Self {
        self.state_set_bound = bound;
        self
    }
}

impl ControlAffine for ControlAffineModel {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, x: &Vector) -> Vector {
        (self.drift)(x)
    }
    fn input_gain(&self, x: &Vector) -> Matrix {
        (self.gain)(x)
    }
    fn input_bounds(&self) -> &InputBounds {
        &self.bounds
    }
    fn state_set_bound(&self) -> f64 {
        self.state_set_bound
    }
}

/// Additive disturbance `d(t, x)`.
pub type DisturbanceFn = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;

/// Input-gain matrix `Λ`, additive disturbance `d(t, x)` and named parameter
/// overrides for the true plant.
#[derive(Clone)]
pub struct PerturbationSpec {
    lambda: Matrix,
    disturbance: Option<DisturbanceFn>,
    parameter_overrides: BTreeMap<String, f64>,
}

impl core::fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PerturbationSpec")
            .field("lambda", &self.lambda)
            .field("disturbance", &self.disturbance.is_some())
            .field("parameter_overrides", &self.parameter_overrides)
            .finish()
    }
}

impl PerturbationSpec {
    /// Validates that `Λ` is square, strictly row-diagonally dominant and has
    /// a positive diagonal.
    pub fn new(lambda: Matrix) -> Result<Self> {
        if !lambda.is_square() {
            return Err(Error::Config(format!(
                "lambda must be square, got {}x{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        for i in 0..lambda.nrows() {
            let diag = lambda[(i, i)];
            let off: f64 = (0..lambda.ncols())
                .filter(|&j| j != i)
                .map(|j| lambda[(i, j)].abs())
                .sum();
            if !(diag > 0.0) || !(diag.abs() > off) {
                return Err(Error::Config(format!(
                    "lambda row {i} is not strictly diagonally dominant with positive diagonal"
                )));
            }
        }
        Ok(Self {
            lambda,
            disturbance: None,
            parameter_overrides: BTreeMap::new(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            lambda: Matrix::identity(m, m),
            disturbance: None,
            parameter_overrides: BTreeMap::new(),
        }
    }

    /// `Λ = s·I`.
    pub fn input_gain_scale(m: usize, scale: f64) -> Result<Self> {
        Self::new(Matrix::identity(m, m) * scale)
    }

    pub fn with_disturbance(
        mut self,
        d: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.disturbance = Some(Arc::new(d));
        self
    }

    pub fn with_shared_disturbance(mut self, d: DisturbanceFn) -> Self {
        self.disturbance = Some(d);
        self
    }

    pub fn with_override(mut self, name: &str, value: f64) -> Self {
        self.parameter_overrides.insert(String::from(name), value);
        self
    }

    pub fn lambda(&self) -> &Matrix {
        &self.lambda
    }

    pub fn parameter_overrides(&self) -> &BTreeMap<String, f64> {
        &self.parameter_overrides
    }

    pub fn has_disturbance(&self) -> bool {
        self.disturbance.is_some()
    }

    /// `d(t, x)`, zero when no disturbance is configured.
    pub fn disturbance(&self, t: f64, x: &Vector) -> Vector {
        match &self.disturbance {
            Some(d) => d(t, x),
            None => Vector::zeros(x.len()),
        }
    }
}

fn check_state_input(model: &dyn ControlAffine, x: &Vector, u: &Vector) -> Result<()> {
    check_dim("state", model.state_dim(), x.len())?;
    check_dim("input", model.input_dim(), u.len())?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(String::from("non-finite input")));
    }
    Ok(())
}

/// `f(x) + g(x)u`.
pub fn nominal_derivative(model: &dyn ControlAffine, x: &Vector, u: &Vector) -> Result<Vector> {
    check_state_input(model, x, u)?;
    Ok(model.drift(x) + model.input_gain(x) * u)
}

/// `f(x) + g(x)Λu + d(t, x)` evaluated on the true plant instance.
pub fn perturbed_derivative(
    model: &dyn ControlAffine,
    pert: &PerturbationSpec,
    t: f64,
    x: &Vector,
    u: &Vector,
) -> Result<Vector> {
    check_state_input(model, x, u)?;
    check_dim("lambda", model.input_dim(), pert.lambda.nrows())?;
    let mut dx = model.drift(x) + model.input_gain(x) * (&pert.lambda * u);
    if pert.disturbance.is_some() {
        let d = pert.disturbance(t, x);
        check_dim("disturbance", model.state_dim(), d.len())?;
        dx += d;
    }
    Ok(dx)
}

/// Lumped disturbance `σ = g(x)(Λ − I)u + d(t, x)`.
pub fn lumped_sigma(
    model: &dyn ControlAffine,
    pert: &PerturbationSpec,
    t: f64,
    x: &Vector,
    u: &Vector,
) -> Result<Vector> {
    check_state_input(model, x, u)?;
    let m = model.input_dim();
    check_dim("lambda", m, pert.lambda.nrows())?;
    let gain_error = &pert.lambda - Matrix::identity(m, m);
    let mut sigma = model.input_gain(x) * (gain_error * u);
    if pert.disturbance.is_some() {
        sigma += pert.disturbance(t, x);
    }
    Ok(sigma)
}

/// Smallest singular value of `g`.
pub fn min_singular_value(g: &Matrix) -> f64 {
    g.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Orthonormal basis of the null space of `g(x)ᵀ` for the model.
pub fn g_perp(model: &dyn ControlAffine, x: &Vector) -> Result<Matrix> {
    check_dim("state", model.state_dim(), x.len())?;
    g_perp_of(&model.input_gain(x))
}

/// Orthonormal basis of the null space of `gᵀ`, an `n × (n − m)` matrix.
///
/// Computed from the full orthogonal factor of a Householder QR of `g`. Each
/// column is flipped so its first non-negligible entry is positive.
pub fn g_perp_of(g: &Matrix) -> Result<Matrix> {
    let (n, m) = g.shape();
    if m > n {
        return Err(Error::SingularGeometry(format!(
            "input gain is {n}x{m}; more inputs than states"
        )));
    }
    let smin = min_singular_value(g);
    if !(smin > RANK_TOLERANCE) {
        return Err(Error::SingularGeometry(format!(
            "input gain rank deficient (smallest singular value {smin:e})"
        )));
    }
    let qr = g.clone().qr();
    let mut q_t = Matrix::identity(n, n);
    qr.q_tr_mul(&mut q_t);
    let q = q_t.transpose();
    let mut perp = q.columns(m, n - m).into_owned();
    for mut col in perp.column_iter_mut() {
        if let Some(lead) = col.iter().copied().find(|v| v.abs() > 1e-12) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(perp)
}
