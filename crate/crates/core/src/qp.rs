//! Dense convex QP `min ½zᵀPz + qᵀz  s.t.  Az ≤ b` for a handful of
//! variables, solved by enumerating active sets and checking KKT conditions.
//!
//! Exponential in the number of constraints; meant for the two- or
//! three-variable safety-filter problems, not for general use.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Vector};

/// Primal and dual feasibility tolerance, scaled by `1 + |b_i|`.
pub const KKT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vector,
    pub objective: f64,
    /// Indices of constraints treated as equalities at the optimum.
    pub active: Vec<usize>,
    pub multipliers: Vector,
}

pub fn objective(p: &Matrix, q: &Vector, z: &Vector) -> f64 {
    0.5 * z.dot(&(p * z)) + q.dot(z)
}

/// Largest constraint violation `max_i (a_i z − b_i)⁺`.
pub fn max_violation(a: &Matrix, b: &Vector, z: &Vector) -> f64 {
    (a * z - b).iter().fold(0.0, |acc, v| acc.max(*v))
}

fn subsets(k: usize, max_size: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1u32 << k)).filter_map(move |mask| {
        if (mask.count_ones() as usize) <= max_size {
            Some((0..k).filter(|i| mask & (1 << i) != 0).collect())
        } else {
            None
        }
    })
}

/// Solves the QP with positive definite `P`.
///
/// Returns [`Error::Infeasible`] carrying the smallest violation found over
/// all candidate points when no KKT point is primal feasible.
pub fn solve_dense_qp(p: &Matrix, q: &Vector, a: &Matrix, b: &Vector) -> Result<QpSolution> {
    let n = p.nrows();
    check_dim("QP P columns", n, p.ncols())?;
    check_dim("QP q", n, q.len())?;
    check_dim("QP A columns", n, a.ncols())?;
    check_dim("QP b", a.nrows(), b.len())?;
    let k = a.nrows();
    if k > 20 {
        return Err(Error::Config(format!(
            "active-set enumeration over {k} constraints is too large"
        )));
    }
    let mut best: Option<QpSolution> = None;
    let mut least_violation = f64::INFINITY;
    for set in subsets(k, n) {
        let s = set.len();
        let mut kkt = Matrix::zeros(n + s, n + s);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        let mut rhs = Vector::zeros(n + s);
        rhs.rows_mut(0, n).copy_from(&(-q));
        for (r, &ci) in set.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = a[(ci, j)];
                kkt[(j, n + r)] = a[(ci, j)];
            }
            rhs[n + r] = b[ci];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let z = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, s).into_owned();
        let slack = a * &z - b;
        let violation = (0..k)
            .map(|i| slack[i] / (1.0 + b[i].abs()))
            .fold(0.0, f64::max);
        least_violation = least_violation.min(max_violation(a, b, &z));
        if violation > KKT_TOLERANCE || lambda.iter().any(|l| *l < -KKT_TOLERANCE) {
            continue;
        }
        let obj = objective(p, q, &z);
        let better = match &best {
            Some(cur) => obj < cur.objective,
            None => true,
        };
        if better {
            let mut multipliers = Vector::zeros(k);
            for (r, &ci) in set.iter().enumerate() {
                multipliers[ci] = lambda[r].max(0.0);
            }
            best = Some(QpSolution {
                z,
                objective: obj,
                active: set,
                multipliers,
            });
        }
    }
    best.ok_or(Error::Infeasible {
        margin: least_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn unconstrained_minimum_inside_box() {
        let p = Matrix::identity(2, 2);
        let q = Vector::from_column_slice(&[-1.0, 0.5]);
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = Vector::from_column_slice(&[5.0, 5.0]);
        let s = solve_dense_qp(&p, &q, &a, &b).unwrap();
        assert_abs_diff_eq!(s.z[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.z[1], -0.5, epsilon = 1e-14);
        assert!(s.active.is_empty());
    }

    #[test]
    fn projection_onto_halfplane() {
        // min ½‖z − (2, 2)‖² s.t. z0 + z1 ≤ 2  →  (1, 1)
        let p = Matrix::identity(2, 2);
        let q = Vector::from_column_slice(&[-2.0, -2.0]);
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = Vector::from_column_slice(&[2.0]);
        let s = solve_dense_qp(&p, &q, &a, &b).unwrap();
        assert_abs_diff_eq!(s.z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.multipliers[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_reports_violation() {
        let p = Matrix::identity(1, 1);
        let q = Vector::zeros(1);
        let a = Matrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = Vector::from_column_slice(&[-1.0, -1.0]);
        assert!(
            matches!(solve_dense_qp(&p, &q, &a, &b), Err(Error::Infeasible { margin }) if margin > 0.0)
        );
    }

    proptest! {
        #[test]
        fn optimum_beats_random_feasible_points(
            c in proptest::collection::vec(-3.0f64..3.0, 2),
            rows in proptest::collection::vec(-1.0f64..1.0, 6),
            rhs in proptest::collection::vec(0.1f64..2.0, 3),
            probes in proptest::collection::vec(-2.0f64..2.0, 40),
        ) {
            let p = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
            let q = Vector::from_column_slice(&c);
            let a = Matrix::from_row_slice(3, 2, &rows);
            let b = Vector::from_column_slice(&rhs);
            // z = 0 is strictly feasible because b > 0.
            let s = solve_dense_qp(&p, &q, &a, &b).unwrap();
            prop_assert!(max_violation(&a, &b, &s.z) < 1e-8);
            for pair in probes.chunks(2) {
                let z = Vector::from_column_slice(pair);
                if max_violation(&a, &b, &z) <= 0.0 {
                    prop_assert!(s.objective <= objective(&p, &q, &z) + 1e-9);
                }
            }
        }
    }
}
