//! Fixed-step classical Runge-Kutta with zero-order-hold input.

use crate::error::{Error, Result};
use crate::Vector;

/// One RK4 step of `ẋ = F(t, x, u)` with `u` held over `[t, t + dt]`.
///
/// A non-finite stage or result is reported as divergence at `t`.
pub fn rk4_step<F>(derivative: F, t: f64, x: &Vector, u: &Vector, dt: f64) -> Result<Vector>
where
    F: Fn(f64, &Vector, &Vector) -> Result<Vector>,
{
    if !(dt > 0.0) {
        return Err(Error::Config(alloc::format!(
            "integration step must be positive, got {dt}"
        )));
    }
    let half = 0.5 * dt;
    let k1 = derivative(t, x, u)?;
    let k2 = derivative(t + half, &(x + &k1 * half), u)?;
    let k3 = derivative(t + half, &(x + &k2 * half), u)?;
    let k4 = derivative(t + dt, &(x + &k3 * dt), u)?;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::SimulationDiverged { t })
    }
}
