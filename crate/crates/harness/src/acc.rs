//! ACC safety runs and the estimation-error bound table.

use adaug_core::l1::bounds::compute_gamma;
use adaug_core::safe::acc::{
    acc_bounds, run_acc_scenario, AccScenarioConfig, AccTrajectory, AccVariant,
};

use crate::error::Result;

/// Sampling periods of the default bound table.
pub const GAMMA_PERIODS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// `(T_s, γ(T_s))` for the ACC constants of `cfg`, followed by the limit
/// row `(0, γ(0))`.
pub fn gamma_table(cfg: &AccScenarioConfig, periods: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::with_capacity(periods.len() + 1);
    for &t_s in periods {
        let b = acc_bounds(&cfg.params, cfg.beta_margin, cfg.a, t_s)?;
        rows.push((t_s, compute_gamma(&b, cfg.a, t_s)));
    }
    let b = acc_bounds(
        &cfg.params,
        cfg.beta_margin,
        cfg.a,
        periods.first().copied().unwrap_or(1e-3),
    )?;
    rows.push((0.0, compute_gamma(&b, cfg.a, 0.0)));
    Ok(rows)
}

pub fn run_variants(
    cfg: &AccScenarioConfig,
    variants: &[AccVariant],
) -> Result<Vec<AccTrajectory>> {
    variants
        .iter()
        .map(|&v| Ok(run_acc_scenario(v, cfg)?))
        .collect()
}

pub fn summary_header() -> Vec<String> {
    [
        "variant",
        "min_h",
        "gamma",
        "estimate_error_sup",
        "infeasible_steps",
        "final_v_f",
        "final_distance",
    ]
    .map(String::from)
    .to_vec()
}

pub fn summary_record(t: &AccTrajectory) -> Vec<String> {
    vec![
        t.variant.name().into(),
        t.min_h.to_string(),
        t.gamma.to_string(),
        t.estimate_error_sup
            .map_or(String::new(), |e| e.to_string()),
        t.infeasible_steps.to_string(),
        t.final_state[1].to_string(),
        t.final_state[2].to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_scales_by_decade_and_vanishes_at_zero() {
        let rows = gamma_table(&AccScenarioConfig::default(), &GAMMA_PERIODS).unwrap();
        assert_eq!(rows.len(), 5);
        for w in rows[..4].windows(2) {
            let ratio = w[0].1 / w[1].1;
            assert!((ratio - 10.0).abs() < 0.1, "{ratio}");
        }
        assert_eq!(rows[4], (0.0, 0.0));
    }
}
