//! Small dense linear-algebra helpers: finite-difference Jacobians,
//! Sylvester/Lyapunov solves and the continuous-time algebraic Riccati
//! equation.

use alloc::format;

use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Vector};

/// Relative central-difference step: `h_i = 1e-6 · (1 + |x_i|)`.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference Jacobian of `fun` at `x`.
pub fn jacobian(fun: impl Fn(&Vector) -> Vector, x: &Vector) -> Matrix {
    let n = x.len();
    let mut probe = x.clone();
    let mut columns = alloc::vec::Vec::with_capacity(n);
    for i in 0..n {
        let h = FD_STEP * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let plus = fun(&probe);
        probe[i] = x[i] - h;
        let minus = fun(&probe);
        probe[i] = x[i];
        columns.push((plus - minus) / (2.0 * h));
    }
    if columns.is_empty() {
        return Matrix::zeros(fun(x).len(), 0);
    }
    Matrix::from_columns(&columns)
}

/// Solves `A X + X B = C` through the Kronecker form
/// `(I ⊗ A + Bᵀ ⊗ I) vec(X) = vec(C)`.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (n, m) = c.shape();
    check_dim("sylvester A", n, a.nrows())?;
    check_dim("sylvester B", m, b.nrows())?;
    let op = Matrix::identity(m, m).kronecker(a) + b.transpose().kronecker(&Matrix::identity(n, n));
    let rhs = Vector::from_column_slice(c.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Synthesis(format!("singular Sylvester operator ({n}x{m})")))?;
    Ok(Matrix::from_column_slice(n, m, sol.as_slice()))
}

/// Solves `Aᵀ P + P A + Q = 0`, symmetrized.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let p = solve_sylvester(&a.transpose(), a, &(-q))?;
    Ok((&p + p.transpose()) * 0.5)
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &Matrix) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Stabilizing gain by the Bass method: with `A_β = A + βI` anti-stable,
/// solve `A_β Z + Z A_βᵀ = 2 B Bᵀ` and take `K = Bᵀ Z⁻¹`.
///
/// `β` is one more than the largest `|Re λ(A)|`, the smallest shift that
/// keeps the Gramian well conditioned.
pub fn bass_gain(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let beta = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re.abs())
        .fold(0.0, f64::max)
        + 1.0;
    let shifted = a + Matrix::identity(n, n) * beta;
    let z = solve_sylvester(&shifted, &shifted.transpose(), &(b * b.transpose() * 2.0))?;
    let z = (&z + z.transpose()) * 0.5;
    let z_inv = z
        .cholesky()
        .ok_or_else(|| {
            Error::Synthesis(
                "(A, B) is not controllable (Bass Gramian not positive definite)".into(),
            )
        })?
        .inverse();
    Ok(b.transpose() * z_inv)
}

#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: Matrix,
    /// `K = R⁻¹ Bᵀ P`.
    pub k: Matrix,
    pub iterations: usize,
    /// `‖Aᵀ P + P A − P B R⁻¹ Bᵀ P + Q‖_F`.
    pub residual: f64,
}

/// Riccati residual `Aᵀ P + P A − P B R⁻¹ Bᵀ P + Q`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Synthesis("R is singular".into()))?;
    Ok(a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q)
}

/// Newton–Kleinman iteration for `Aᵀ P + P A − P B R⁻¹ Bᵀ P + Q = 0`,
/// started from a Bass gain.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<CareSolution> {
    let n = a.nrows();
    check_dim("CARE B rows", n, b.nrows())?;
    check_dim("CARE Q", n, q.nrows())?;
    check_dim("CARE R", b.ncols(), r.nrows())?;
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Synthesis("R must be positive definite".into()))?;
    let mut k = if spectral_abscissa(a) < 0.0 {
        Matrix::zeros(b.ncols(), n)
    } else {
        bass_gain(a, b)?
    };
    let mut p_prev: Option<Matrix> = None;
    for it in 1..=100 {
        let closed = a - b * &k;
        if spectral_abscissa(&closed) >= 0.0 {
            return Err(Error::Synthesis(format!(
                "Newton-Kleinman lost stability at iteration {it}"
            )));
        }
        let p = solve_lyapunov(&closed, &(q + k.transpose() * r * &k))?;
        k = r_chol.solve(&(b.transpose() * &p));
        let done = match &p_prev {
            Some(prev) => (&p - prev).norm() <= 1e-11 * p.norm().max(1.0),
            None => false,
        };
        if done {
            let residual = care_residual(a, b, q, r, &p)?.norm();
            return Ok(CareSolution {
                p,
                k,
                iterations: it,
                residual,
            });
        }
        p_prev = Some(p);
    }
    Err(Error::Synthesis(
        "Newton-Kleinman did not converge in 100 iterations".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn double_integrator() -> (Matrix, Matrix) {
        (
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        let x = Vector::from_column_slice(&[0.3, -1.2, 4.0]);
        let j = jacobian(|v| &a * v, &x);
        assert_abs_diff_eq!((j - a).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn jacobian_of_double_integrator_step() {
        let dt = 0.1;
        let step = |z: &Vector| {
            // z = [x, v, u]
            Vector::from_column_slice(&[z[0] + dt * z[1] + 0.5 * dt * dt * z[2], z[1] + dt * z[2]])
        };
        let j = jacobian(step, &Vector::from_column_slice(&[1.0, 2.0, -0.5]));
        let analytic = Matrix::from_row_slice(2, 3, &[1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt]);
        assert_abs_diff_eq!((j - analytic).norm(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn lyapunov_scalar() {
        let p = solve_lyapunov(
            &Matrix::from_element(1, 1, -2.0),
            &Matrix::from_element(1, 1, 4.0),
        )
        .unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn care_double_integrator() {
        let (a, b) = double_integrator();
        let sol = solve_care(&a, &b, &Matrix::identity(2, 2), &Matrix::identity(1, 1)).unwrap();
        assert_abs_diff_eq!(sol.k[(0, 0)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.k[(0, 1)], 3f64.sqrt(), epsilon = 1e-10);
        assert!(sol.residual < 1e-8);
        assert!(spectral_abscissa(&(a - b * sol.k)) < 0.0);
    }

    #[test]
    fn bass_gain_stabilizes_unstable_pair() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let k = bass_gain(&a, &b).unwrap();
        assert!(spectral_abscissa(&(a - b * k)) < 0.0);
    }

    #[test]
    fn uncontrollable_pair_is_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(solve_care(&a, &b, &Matrix::identity(2, 2), &Matrix::identity(1, 1)).is_err());
    }

    proptest! {
        #[test]
        fn care_residual_is_small(entries in proptest::collection::vec(-2.0f64..2.0, 9), b in proptest::collection::vec(0.5f64..2.0, 3)) {
            let a = Matrix::from_row_slice(3, 3, &entries);
            let b = Matrix::from_column_slice(3, 1, &b);
            let bmat = Matrix::from_columns(&[b.column(0).into_owned(), Vector::from_column_slice(&[0.0, 1.0, 0.0])]);
            if let Ok(sol) = solve_care(&a, &bmat, &Matrix::identity(3, 3), &Matrix::identity(2, 2)) {
                prop_assert!(sol.residual < 1e-8 * sol.p.norm().max(1.0));
                prop_assert!(spectral_abscissa(&(&a - &bmat * &sol.k)) < 0.0);
            }
        }
    }
}
