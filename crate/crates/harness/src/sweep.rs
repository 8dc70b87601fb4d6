//! Episode execution and parallel sweeps.

use std::collections::BTreeSet;
use std::path::Path;

use adaug_core::l1::L1Params;
use adaug_core::metrics::{episode_metrics, MetricConfig, MetricSummary};
use adaug_core::policy::Policy;
use adaug_core::sim::{run_episode, Episode, SimConfig, Trajectory};
use adaug_core::Vector;
use rayon::prelude::*;

use crate::config::{PlantName, ScenarioConfig};
use crate::csvio;
use crate::error::{HarnessError, Result};
use crate::plant::{build_policy, initial_state, target_state, Plant};
use crate::scenarios::{sample_scenarios, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Baseline,
    BaselineL1,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::BaselineL1 => "baseline+l1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "baseline+l1" | "l1" => Ok(Self::BaselineL1),
            other => Err(HarnessError::config(format!(
                "unknown variant {other:?} (expected baseline or baseline+l1)"
            ))),
        }
    }

    pub fn uses_l1(self) -> bool {
        self == Self::BaselineL1
    }
}

/// Nominal plant, baseline policy and initial state shared by every episode
/// of one configuration.
pub struct Experiment {
    pub cfg: ScenarioConfig,
    pub nominal: Plant,
    pub policy: Box<dyn Policy>,
    pub x0: Vector,
    pub target: Vector,
}

fn default_success_threshold(plant: PlantName) -> f64 {
    match plant {
        PlantName::Pendubot => -0.5,
        PlantName::Cartpole => -0.05,
        PlantName::Quadrotor => -0.5,
    }
}

impl Experiment {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let nominal = Plant::nominal(&cfg)?;
        let policy = build_policy(&cfg, &nominal)?;
        let x0 = initial_state(&cfg, &nominal)?;
        let target = target_state(&cfg, &nominal);
        Ok(Self {
            cfg,
            nominal,
            policy,
            x0,
            target,
        })
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut s = SimConfig::new(self.cfg.t_ctrl(), self.cfg.l1.t_s, self.cfg.sim.duration);
        s.dt_int = self.cfg.sim.dt_int;
        s.clamp_inputs = self.cfg.sim.clamp_inputs;
        s.seed = self.cfg.seed;
        s
    }

    pub fn l1_params(&self) -> Result<L1Params> {
        let m = self.nominal.model().input_dim();
        Ok(L1Params::uniform(
            self.cfg.l1.a,
            self.cfg.l1.t_s,
            self.cfg.l1.k,
            m,
        )?)
    }

    /// Runs one episode and fills the per-step rewards.
    pub fn run(&self, scenario: &Scenario, variant: Variant) -> Result<Trajectory> {
        let true_plant = self.nominal.with_overrides(&scenario.overrides)?;
        let perturbation = self.nominal.perturbation(scenario, &true_plant)?;
        let ep = Episode {
            true_plant: true_plant.model(),
            perturbation: &perturbation,
            nominal: self.nominal.model(),
            policy: self.policy.as_ref(),
            l1: if variant.uses_l1() {
                Some(self.l1_params()?)
            } else {
                None
            },
            x0: self.x0.clone(),
        };
        let mut traj = run_episode(&ep, &self.sim_config())?;
        traj.meta.scenario_id = scenario.id.clone();
        traj.meta.perturbation = describe(scenario);
        let target = self.target.clone();
        let plant = &self.nominal;
        traj.fill_rewards(|x| plant.reward(x, &target));
        Ok(traj)
    }

    pub fn metric_config(&self, nominal_reward: Option<f64>) -> MetricConfig {
        MetricConfig {
            worst_step_reward: self.nominal.worst_reward(),
            nominal_reward,
            success_threshold: self
                .cfg
                .success_threshold
                .unwrap_or_else(|| default_success_threshold(self.cfg.plant)),
            target: Some((self.target.clone(), self.nominal.tracked())),
        }
    }

    pub fn score(&self, traj: &Trajectory, nominal_reward: Option<f64>) -> MetricSummary {
        let target = self.target.clone();
        let plant = &self.nominal;
        episode_metrics(
            traj,
            &|x| plant.reward(x, &target),
            &self.metric_config(nominal_reward),
        )
    }

    /// `sup_t max_i |x_i(t) − x*_i|` over the tracked components; infinite
    /// for a failed episode.
    pub fn max_tracking_inf(&self, traj: &Trajectory) -> f64 {
        if traj.failed() {
            return f64::INFINITY;
        }
        let idx = self.nominal.tracked();
        traj.states
            .iter()
            .chain(std::iter::once(&traj.final_state))
            .flat_map(|x| idx.iter().map(move |&i| (x[i] - self.target[i]).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn describe(s: &Scenario) -> String {
    let mut parts = vec![format!("lambda={}", s.lambda)];
    parts.extend(s.overrides.iter().map(|(k, v)| format!("{k}={v}")));
    if let Some(w) = &s.wind {
        parts.push(format!("wind=({},{})", w.mean[0], w.mean[1]));
    }
    parts.join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: Scenario,
    pub variant: Variant,
    pub metrics: MetricSummary,
    pub max_tracking_inf: f64,
    pub estimate_error_sup: Option<f64>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.metrics.failure_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(SweepRow::failed)
    }

    pub fn override_keys(&self) -> Vec<String> {
        let keys: BTreeSet<&String> = self
            .rows
            .iter()
            .flat_map(|r| r.scenario.overrides.keys())
            .collect();
        keys.into_iter().cloned().collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["scenario_id", "variant", "lambda"]
            .map(String::from)
            .to_vec();
        h.extend(self.override_keys());
        h.extend(
            [
                "wind_mean_x",
                "wind_mean_y",
                "accumulated_reward",
                "normalized_reward",
                "success",
                "failure_time",
                "final_tracking_error",
                "max_tracking_error",
                "max_tracking_inf",
                "estimate_error_sup",
            ]
            .map(String::from),
        );
        h
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        let keys = self.override_keys();
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        self.rows
            .iter()
            .map(|r| {
                let s = &r.scenario;
                let mut rec = vec![s.id.clone(), r.variant.name().into(), s.lambda.to_string()];
                rec.extend(keys.iter().map(|k| opt(s.overrides.get(k).copied())));
                rec.push(opt(s.wind.as_ref().map(|w| w.mean[0])));
                rec.push(opt(s.wind.as_ref().map(|w| w.mean[1])));
                let m = &r.metrics;
                rec.extend([
                    m.accumulated_reward.to_string(),
                    m.normalized_reward.to_string(),
                    u8::from(m.success).to_string(),
                    opt(m.failure_time),
                    m.final_tracking_error.to_string(),
                    m.tracking_max.to_string(),
                    r.max_tracking_inf.to_string(),
                    opt(r.estimate_error_sup),
                ]);
                rec
            })
            .collect()
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        csvio::write_table(path, &self.header(), &self.records())
    }

    /// Mean normalized reward of `variant` over the rows selected by `keep`.
    pub fn mean_normalized(
        &self,
        variant: Variant,
        keep: impl Fn(&Scenario) -> bool,
    ) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant && keep(&r.scenario))
            .map(|r| r.metrics.normalized_reward)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    pub variants: Vec<Variant>,
    /// Directory for per-episode trajectory CSVs.
    pub episode_dir: Option<std::path::PathBuf>,
}

impl SweepOptions {
    /// Variants implied by the config and the `--no-l1` / `--variant` flags.
    pub fn variants_for(cfg: &ScenarioConfig, no_l1: bool, only: Option<Variant>) -> Vec<Variant> {
        match only {
            Some(v) => vec![v],
            None if no_l1 || !cfg.l1.enabled => vec![Variant::Baseline],
            None => vec![Variant::Baseline, Variant::BaselineL1],
        }
    }
}

/// Runs every (scenario, variant) pair of `cfg` with the given seed.
///
/// Episode failures are recorded in the rows, never returned as errors.
/// Rows come back sorted by scenario id, then variant.
pub fn run_sweep(cfg: &ScenarioConfig, seed: u64, opts: &SweepOptions) -> Result<SweepResult> {
    let exp = Experiment::new(cfg.clone())?;
    let scenarios = sample_scenarios(cfg, seed);
    let variants = if opts.variants.is_empty() {
        SweepOptions::variants_for(cfg, false, None)
    } else {
        opts.variants.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;

    let nominal = Scenario::nominal();
    let nominal_rewards: Vec<(Variant, f64)> = pool.install(|| {
        variants
            .par_iter()
            .map(|&v| {
                Ok((
                    v,
                    exp.score(&exp.run(&nominal, v)?, None).accumulated_reward,
                ))
            })
            .collect::<Result<_>>()
    })?;
    let nominal_for = |v: Variant| {
        nominal_rewards
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, r)| *r)
    };

    let jobs: Vec<(&Scenario, Variant)> = scenarios
        .iter()
        .flat_map(|s| variants.iter().map(move |&v| (s, v)))
        .collect();
    let mut rows: Vec<SweepRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, v)| {
                let traj = exp.run(s, v)?;
                if let Some(dir) = &opts.episode_dir {
                    let path = dir.join(format!("{}_{}.csv", s.id, v.name()));
                    csvio::write_trajectory(csvio::create_file(&path)?, &traj)?;
                }
                Ok(SweepRow {
                    scenario: s.clone(),
                    variant: v,
                    metrics: exp.score(&traj, nominal_for(v)),
                    max_tracking_inf: exp.max_tracking_inf(&traj),
                    estimate_error_sup: traj.estimate_error_sup,
                })
            })
            .collect::<Result<_>>()
    })?;
    rows.sort_by(|a, b| (&a.scenario.id, a.variant).cmp(&(&b.scenario.id, b.variant)));
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PlantName;

    fn short_pendubot() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.sim.duration = 0.5;
        cfg.l1.t_s = 0.002;
        cfg.x0_offset = Some(vec![0.05, -0.05, 0.0, 0.0]);
        cfg
    }

    #[test]
    fn nominal_only_sweep_normalizes_to_one() {
        let mut cfg = short_pendubot();
        cfg.episodes = 3;
        let res = run_sweep(&cfg, 1, &SweepOptions::default()).unwrap();
        assert_eq!(res.rows.len(), 6);
        for r in &res.rows {
            assert_eq!(r.metrics.normalized_reward, 1.0, "{:?}", r.variant);
        }
    }

    #[test]
    fn summary_is_sorted_and_rectangular() {
        let mut cfg = short_pendubot();
        cfg.episodes = 4;
        cfg.perturbation.lambda = Some([0.5, 1.0]);
        cfg.perturbation
            .scales
            .insert("m1_scale".into(), [1.0, 2.0]);
        let res = run_sweep(
            &cfg,
            3,
            &SweepOptions {
                jobs: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let ids: Vec<_> = res
            .rows
            .iter()
            .map(|r| (r.scenario.id.clone(), r.variant))
            .collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        let width = res.header().len();
        assert!(res.records().iter().all(|r| r.len() == width));
        for r in &res.rows {
            assert!((0.0..=1.05).contains(&r.metrics.normalized_reward));
        }
    }

    #[test]
    fn variant_selection() {
        let cfg = short_pendubot();
        assert_eq!(
            SweepOptions::variants_for(&cfg, true, None),
            vec![Variant::Baseline]
        );
        assert_eq!(SweepOptions::variants_for(&cfg, false, None).len(), 2);
        assert_eq!(
            SweepOptions::variants_for(&cfg, false, Some(Variant::BaselineL1)),
            vec![Variant::BaselineL1]
        );
        assert!(Variant::parse("pid").is_err());
    }
}
