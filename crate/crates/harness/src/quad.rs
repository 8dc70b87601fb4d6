//! Quadrotor robustness suites around a DDP navigation policy.

use std::collections::BTreeMap;

use adaug_core::ddp::{ddp_policy, DdpPolicy};
use adaug_core::l1::L1Params;
use adaug_core::plants::Quadrotor;
use adaug_core::sim::{run_episode, Episode, SimConfig, Trajectory};
use adaug_core::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::QuadSuiteConfig;
use crate::error::{HarnessError, Result};
use crate::plant::{solve_quadrotor, Plant};
use crate::scenarios::{sample_propeller_loss, sample_wind, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Propeller,
    MassInertia,
    Wind,
    Joint,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Self::Propeller, Self::MassInertia, Self::Wind, Self::Joint];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "propeller" => Ok(Self::Propeller),
            "mass-inertia" | "mass" => Ok(Self::MassInertia),
            "wind" => Ok(Self::Wind),
            "joint" => Ok(Self::Joint),
            other => Err(HarnessError::config(format!(
                "unknown suite {other:?} (expected propeller, mass-inertia, wind or joint)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Propeller => "propeller",
            Self::MassInertia => "mass-inertia",
            Self::Wind => "wind",
            Self::Joint => "joint",
        }
    }

    fn has_propeller(self) -> bool {
        matches!(self, Self::Propeller | Self::Joint)
    }

    fn has_mass(self) -> bool {
        matches!(self, Self::MassInertia | Self::Joint)
    }

    fn has_wind(self) -> bool {
        matches!(self, Self::Wind | Self::Joint)
    }
}

/// Scenarios of one suite. Each suite has its own stream derived from the
/// seed, so adding a suite does not change the others.
pub fn suite_scenarios(cfg: &QuadSuiteConfig, suite: Suite) -> Vec<Scenario> {
    let stream = Suite::ALL.iter().position(|s| *s == suite).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    (0..cfg.scenarios)
        .map(|i| {
            let mut overrides = BTreeMap::new();
            if suite.has_propeller() {
                overrides.extend(sample_propeller_loss(&mut rng, cfg.propeller_range));
            }
            if suite.has_mass() {
                let [lo, hi] = cfg.mass_range;
                let mut draw = || if lo == hi { lo } else { rng.gen_range(lo..hi) };
                overrides.insert("mass_scale".into(), draw());
                overrides.insert("inertia_scale".into(), draw());
            }
            let wind = suite.has_wind().then(|| {
                sample_wind(
                    &mut rng,
                    cfg.wind_mean,
                    cfg.wind_std_fraction,
                    cfg.wind_period,
                    cfg.duration(),
                )
            });
            Scenario {
                id: format!("{}-{i:02}", suite.name()),
                lambda: 1.0,
                overrides,
                wind,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub suite: Suite,
    pub scenario: Scenario,
    pub l1: bool,
    /// `‖p(T) − p_ideal(T)‖`, the final-position error against the ideal
    /// run; infinite when the run diverged.
    pub final_error: f64,
    /// `‖p(T) − p*‖`.
    pub target_error: f64,
    /// RMS over time of `‖p(t) − p_ideal(t)‖`.
    pub rms_deviation: f64,
    pub failure_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSummary {
    pub suite: Suite,
    /// Median final-position error without L1.
    pub median_plain: f64,
    pub median_l1: f64,
    pub median_rms_plain: f64,
    pub median_rms_l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadReport {
    /// `‖p_ideal(T) − p*‖`.
    pub ideal_target_error: f64,
    /// Largest position gap between the ideal run and the stored DDP
    /// trajectory at the optimization grid points.
    pub ideal_vs_nominal: f64,
    pub ddp_cost: f64,
    pub ddp_iterations: usize,
    pub ddp_converged: bool,
    pub rows: Vec<QuadRow>,
    pub summaries: Vec<SuiteSummary>,
}

impl QuadReport {
    pub fn summary(&self, suite: Suite) -> Option<&SuiteSummary> {
        self.summaries.iter().find(|s| s.suite == suite)
    }

    pub fn header() -> Vec<String> {
        [
            "suite",
            "scenario_id",
            "variant",
            "overrides",
            "wind_mean_x",
            "wind_mean_y",
            "final_error",
            "rms_deviation",
            "target_error",
            "failure_time",
        ]
        .map(String::from)
        .to_vec()
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        self.rows
            .iter()
            .map(|r| {
                let s = &r.scenario;
                let overrides: Vec<String> = s
                    .overrides
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                vec![
                    r.suite.name().into(),
                    s.id.clone(),
                    if r.l1 { "ddp+l1" } else { "ddp" }.into(),
                    overrides.join(";"),
                    opt(s.wind.as_ref().map(|w| w.mean[0])),
                    opt(s.wind.as_ref().map(|w| w.mean[1])),
                    r.final_error.to_string(),
                    r.rms_deviation.to_string(),
                    r.target_error.to_string(),
                    opt(r.failure_time),
                ]
            })
            .collect()
    }

    pub fn summary_header() -> Vec<String> {
        [
            "suite",
            "median_final_error_ddp",
            "median_final_error_ddp_l1",
            "median_rms_deviation_ddp",
            "median_rms_deviation_ddp_l1",
        ]
        .map(String::from)
        .to_vec()
    }

    pub fn summary_records(&self) -> Vec<Vec<String>> {
        self.summaries
            .iter()
            .map(|s| {
                vec![
                    s.suite.name().into(),
                    s.median_plain.to_string(),
                    s.median_l1.to_string(),
                    s.median_rms_plain.to_string(),
                    s.median_rms_l1.to_string(),
                ]
            })
            .collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

struct Setup {
    nominal: Plant,
    policy: DdpPolicy,
    sim: SimConfig,
    l1: L1Params,
    target: Vector,
}

impl Setup {
    fn run(&self, scenario: &Scenario, l1: bool) -> Result<Trajectory> {
        let true_plant = self.nominal.with_overrides(&scenario.overrides)?;
        let perturbation = self.nominal.perturbation(scenario, &true_plant)?;
        let ep = Episode {
            true_plant: true_plant.model(),
            perturbation: &perturbation,
            nominal: self.nominal.model(),
            policy: &self.policy,
            l1: l1.then(|| self.l1.clone()),
            x0: Vector::zeros(12),
        };
        Ok(run_episode(&ep, &self.sim)?)
    }
}

fn position(x: &Vector) -> Vector {
    x.rows(0, 3).into_owned()
}

/// Solves the navigation problem once, runs the ideal episode on the
/// nominal plant, then every scenario of every configured suite with and
/// without L1.
pub fn run_quad_suites(cfg: &QuadSuiteConfig, jobs: usize) -> Result<QuadReport> {
    cfg.validate()?;
    let quad = Quadrotor::default();
    let (problem, solution) = solve_quadrotor(&quad, &cfg.ddp)?;
    let (ddp_cost, ddp_iterations, ddp_converged) =
        (solution.cost, solution.iterations, solution.converged);
    let problem_grid: Vec<(f64, Vector)> = solution
        .x_nominal
        .iter()
        .enumerate()
        .map(|(k, x)| (k as f64 * solution.dt, position(x)))
        .collect();
    let setup = Setup {
        policy: ddp_policy(solution, Some(&problem), quad.hover_input())?,
        nominal: Plant::Quadrotor(quad.clone()),
        sim: SimConfig::new(cfg.t_ctrl, cfg.l1.t_s, cfg.duration()),
        l1: L1Params::uniform(cfg.l1.a, cfg.l1.t_s, cfg.l1.k, 4)?,
        target: problem.x_target.rows(0, 3).into_owned(),
    };

    let ideal = setup.run(&Scenario::nominal(), false)?;
    if ideal.failed() {
        return Err(HarnessError::config(
            "the DDP policy fails on the nominal plant",
        ));
    }
    let ideal_target_error = (position(&ideal.final_state) - &setup.target).norm();
    let ideal_vs_nominal = nominal_gap(&ideal, &problem_grid);

    let suites: Vec<Suite> = cfg
        .suites
        .iter()
        .map(|s| Suite::parse(s))
        .collect::<Result<_>>()?;
    let jobs_list: Vec<(Suite, Scenario, bool)> = suites
        .iter()
        .flat_map(|&suite| {
            suite_scenarios(cfg, suite)
                .into_iter()
                .flat_map(move |s| [(suite, s.clone(), false), (suite, s, true)])
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;
    let mut rows: Vec<QuadRow> = pool.install(|| {
        jobs_list
            .into_par_iter()
            .map(|(suite, scenario, l1)| {
                let traj = setup.run(&scenario, l1)?;
                Ok(score(suite, scenario, l1, &traj, &ideal, &setup.target))
            })
            .collect::<Result<_>>()
    })?;
    rows.sort_by(|a, b| (a.suite, &a.scenario.id, a.l1).cmp(&(b.suite, &b.scenario.id, b.l1)));

    let mut summaries: Vec<SuiteSummary> = suites
        .iter()
        .map(|&suite| {
            let col = |l1: bool, f: fn(&QuadRow) -> f64| -> f64 {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.suite == suite && r.l1 == l1)
                    .map(f)
                    .collect();
                median(&v)
            };
            SuiteSummary {
                suite,
                median_plain: col(false, |r| r.final_error),
                median_l1: col(true, |r| r.final_error),
                median_rms_plain: col(false, |r| r.rms_deviation),
                median_rms_l1: col(true, |r| r.rms_deviation),
            }
        })
        .collect();
    summaries.sort_by_key(|s| s.suite);
    summaries.dedup_by_key(|s| s.suite);

    Ok(QuadReport {
        ideal_target_error,
        ideal_vs_nominal,
        ddp_cost,
        ddp_iterations,
        ddp_converged,
        rows,
        summaries,
    })
}

/// Position gap to the stored trajectory at the grid times the ideal run
/// visits.
fn nominal_gap(ideal: &Trajectory, grid: &[(f64, Vector)]) -> f64 {
    grid.iter()
        .filter_map(|(t, p)| {
            let i = ideal.times.iter().position(|s| (s - t).abs() < 1e-9)?;
            Some((position(&ideal.states[i]) - p).norm())
        })
        .fold(0.0, f64::max)
}

fn score(
    suite: Suite,
    scenario: Scenario,
    l1: bool,
    traj: &Trajectory,
    ideal: &Trajectory,
    target: &Vector,
) -> QuadRow {
    let failure_time = traj.failed().then_some(traj.final_time);
    if failure_time.is_some() {
        return QuadRow {
            suite,
            scenario,
            l1,
            final_error: f64::INFINITY,
            target_error: f64::INFINITY,
            rms_deviation: f64::INFINITY,
            failure_time,
        };
    }
    let p_end = position(&traj.final_state);
    let sq: Vec<f64> = traj
        .states
        .iter()
        .zip(&ideal.states)
        .map(|(x, xi)| (position(x) - position(xi)).norm_squared())
        .collect();
    QuadRow {
        suite,
        scenario,
        l1,
        target_error: (&p_end - target).norm(),
        final_error: (p_end - position(&ideal.final_state)).norm(),
        rms_deviation: (sq.iter().sum::<f64>() / sq.len().max(1) as f64).sqrt(),
        failure_time,
    }
}
