//! Seeded perturbation sampling.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{PerturbationRanges, ScenarioConfig};

/// Piecewise-constant horizontal wind force, N.
#[derive(Debug, Clone, PartialEq)]
pub struct Wind {
    pub mean: [f64; 2],
    pub period: f64,
    pub samples: Vec<[f64; 2]>,
}

impl Wind {
    /// Force at time `t`; the last sample is held past the end.
    pub fn force(&self, t: f64) -> [f64; 2] {
        if self.samples.is_empty() {
            return [0.0; 2];
        }
        let i = ((t / self.period).max(0.0) as usize).min(self.samples.len() - 1);
        self.samples[i]
    }
}

/// One sampled perturbation of the nominal plant.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    /// Uniform input-gain scale `Λ`.
    pub lambda: f64,
    /// Plant parameter overrides, e.g. `m1_scale` or `cp2`.
    pub overrides: BTreeMap<String, f64>,
    pub wind: Option<Wind>,
}

impl Scenario {
    pub fn nominal() -> Self {
        Self {
            id: "nominal".into(),
            lambda: 1.0,
            overrides: BTreeMap::new(),
            wind: None,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Two distinct propellers chosen uniformly, each with a coefficient drawn
/// from `range`.
pub fn sample_propeller_loss(rng: &mut ChaCha8Rng, range: [f64; 2]) -> BTreeMap<String, f64> {
    let mut picked = index::sample(rng, 4, 2).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| (format!("cp{}", i + 1), uniform(rng, range)))
        .collect()
}

/// Per-axis means from `mean_range`; each held sample is normal about its
/// mean with standard deviation `std_fraction · mean`.
pub fn sample_wind(
    rng: &mut ChaCha8Rng,
    mean_range: [f64; 2],
    std_fraction: f64,
    period: f64,
    duration: f64,
) -> Wind {
    let mean = [uniform(rng, mean_range), uniform(rng, mean_range)];
    let count = (duration / period).ceil() as usize + 1;
    let dists = mean.map(|m| Normal::new(m, std_fraction * m.abs()).expect("finite spread"));
    let samples = (0..count)
        .map(|_| [dists[0].sample(rng), dists[1].sample(rng)])
        .collect();
    Wind {
        mean,
        period,
        samples,
    }
}

fn draw(rng: &mut ChaCha8Rng, p: &PerturbationRanges, duration: f64, id: String) -> Scenario {
    let lambda = p.lambda.map_or(1.0, |r| uniform(rng, r));
    let mut overrides: BTreeMap<String, f64> = p
        .scales
        .iter()
        .map(|(k, r)| (k.clone(), uniform(rng, *r)))
        .collect();
    if let Some(r) = p.propeller_loss {
        overrides.extend(sample_propeller_loss(rng, r));
    }
    let wind = p
        .wind_mean
        .map(|r| sample_wind(rng, r, p.wind_std_fraction, p.wind_period, duration));
    Scenario {
        id,
        lambda,
        overrides,
        wind,
    }
}

fn grid_scenarios(cfg: &ScenarioConfig) -> Vec<Scenario> {
    let grid = cfg.grid.as_ref().expect("grid present");
    let lambdas = if grid.lambda.is_empty() {
        vec![1.0]
    } else {
        grid.lambda.clone()
    };
    let mut combos: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new()];
    for (key, values) in &grid.scales {
        combos = combos
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut next = base.clone();
                    next.insert(key.clone(), *v);
                    next
                })
            })
            .collect();
    }
    let mut out = Vec::with_capacity(lambdas.len() * combos.len());
    for &lambda in &lambdas {
        for overrides in &combos {
            out.push(Scenario {
                id: format!("g{:04}", out.len()),
                lambda,
                overrides: overrides.clone(),
                wind: None,
            });
        }
    }
    out
}

/// Scenario list for `cfg`: the `[grid]` product when present, otherwise
/// `cfg.episodes` independent draws from the ranges. Deterministic in
/// `seed`.
pub fn sample_scenarios(cfg: &ScenarioConfig, seed: u64) -> Vec<Scenario> {
    if cfg.grid.is_some() {
        return grid_scenarios(cfg);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.episodes)
        .map(|i| {
            draw(
                &mut rng,
                &cfg.perturbation,
                cfg.sim.duration,
                format!("s{i:04}"),
            )
        })
        .collect()
}
