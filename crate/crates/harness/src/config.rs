//! TOML scenario files.
//!
//! One scenario per file. Every section is optional except `plant`:
//!
//! ```toml
//! plant = "pendubot"          # pendubot | cartpole | quadrotor
//! policy = "lqr"              # lqr | ddp | ddp:<solution.json> | mlp:<policy.json>
//! episodes = 20               # random draws when no [grid] is given
//! seed = 7
//! x0_offset = [0.1, -0.1, 0.0, 0.0]
//! input_limit = 10.0          # pendubot / cart-pole torque or force limit
//!
//! [l1]
//! enabled = true
//! a = 10.0
//! t_s = 0.001
//! k = 200.0
//!
//! [sim]
//! t_ctrl = 0.001              # defaults to l1.t_s
//! duration = 10.0
//!
//! [perturbation]
//! lambda = [0.3, 1.0]
//! scales = { m1_scale = [1.0, 6.0] }
//! wind_mean = [10.0, 25.0]    # quadrotor only, N per horizontal axis
//! propeller_loss = [0.5, 1.0] # quadrotor only, two propellers
//!
//! [grid]                      # cartesian product, replaces random draws
//! lambda = [1.0, 0.5, 0.3]
//! scales = { m1_scale = [1.0, 3.5, 6.0] }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantName {
    Pendubot,
    #[serde(alias = "cart-pole")]
    Cartpole,
    Quadrotor,
}

impl PlantName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pendubot => "pendubot",
            Self::Cartpole => "cartpole",
            Self::Quadrotor => "quadrotor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L1Section {
    pub enabled: bool,
    pub a: f64,
    pub t_s: f64,
    pub k: f64,
}

impl Default for L1Section {
    fn default() -> Self {
        Self {
            enabled: true,
            a: 10.0,
            t_s: 0.001,
            k: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub t_ctrl: Option<f64>,
    pub duration: f64,
    pub dt_int: Option<f64>,
    pub clamp_inputs: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            t_ctrl: None,
            duration: 10.0,
            dt_int: None,
            clamp_inputs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationRanges {
    pub lambda: Option<[f64; 2]>,
    pub scales: BTreeMap<String, [f64; 2]>,
    pub wind_mean: Option<[f64; 2]>,
    /// Standard deviation of each wind sample as a fraction of its mean.
    pub wind_std_fraction: f64,
    /// Hold time of each wind sample, s.
    pub wind_period: f64,
    pub propeller_loss: Option<[f64; 2]>,
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        Self {
            lambda: None,
            scales: BTreeMap::new(),
            wind_mean: None,
            wind_std_fraction: 0.2,
            wind_period: 0.1,
            propeller_loss: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lambda: Vec<f64>,
    pub scales: BTreeMap<String, Vec<f64>>,
}

/// Diagonal LQR weights; plant defaults when absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrSection {
    pub q: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
}

/// Quadrotor trajectory-optimization problem. Weights default to the
/// navigation task: `P = diag(2,2,2,0.1,0.1,0.3,0.1,…)`,
/// `P_N = diag(10,10,10,5,…)`, `Q = diag(20,4,4,4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpSection {
    pub horizon: usize,
    pub dt: f64,
    pub substeps: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub target: [f64; 3],
    pub p_stage: Vec<f64>,
    pub p_final: Vec<f64>,
    pub q_input: Vec<f64>,
}

impl Default for DdpSection {
    fn default() -> Self {
        Self {
            horizon: 400,
            dt: 0.02,
            substeps: 4,
            max_iters: 200,
            tol: 1e-6,
            target: [4.0, 4.0, 2.0],
            p_stage: vec![2.0, 2.0, 2.0, 0.1, 0.1, 0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
            p_final: vec![
                10.0, 10.0, 10.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0,
            ],
            q_input: vec![20.0, 4.0, 4.0, 4.0],
        }
    }
}

impl DdpSection {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.substeps == 0 {
            return Err(HarnessError::config(
                "ddp.horizon and ddp.substeps must be at least 1",
            ));
        }
        if !(self.dt > 0.0) || !(self.tol > 0.0) {
            return Err(HarnessError::config("ddp.dt and ddp.tol must be positive"));
        }
        for (name, v, len) in [
            ("ddp.p_stage", &self.p_stage, 12),
            ("ddp.p_final", &self.p_final, 12),
            ("ddp.q_input", &self.q_input, 4),
        ] {
            if v.len() != len {
                return Err(HarnessError::config(format!(
                    "{name} needs {len} entries, got {}",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantName,
    #[serde(default = "default_policy")]
    pub policy: String,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0_offset: Option<Vec<f64>>,
    #[serde(default)]
    pub input_limit: Option<f64>,
    /// Mean reward over the final 20 % of an episode must exceed this for
    /// the episode to count as a success.
    #[serde(default)]
    pub success_threshold: Option<f64>,
    #[serde(default)]
    pub l1: L1Section,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub perturbation: PerturbationRanges,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub lqr: LqrSection,
    #[serde(default)]
    pub ddp: DdpSection,
    /// Directory relative paths in `policy` resolve against; set by
    /// [`load_scenario`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_policy() -> String {
    "lqr".into()
}

fn default_episodes() -> usize {
    1
}

/// Parsed `policy` field.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Lqr,
    Ddp(Option<PathBuf>),
    Mlp(PathBuf),
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(HarnessError::config(format!(
            "{name} range [{}, {}] is not ordered",
            r[0], r[1]
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn new(plant: PlantName) -> Self {
        Self {
            plant,
            policy: default_policy(),
            episodes: default_episodes(),
            seed: 0,
            x0_offset: None,
            input_limit: None,
            success_threshold: None,
            l1: L1Section::default(),
            sim: SimSection::default(),
            perturbation: PerturbationRanges::default(),
            grid: None,
            lqr: LqrSection::default(),
            ddp: DdpSection::default(),
            base_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn policy_spec(&self) -> Result<PolicySpec> {
        let resolve = |p: &str| -> PathBuf {
            let path = PathBuf::from(p);
            match (&self.base_dir, path.is_relative()) {
                (Some(base), true) => base.join(path),
                _ => path,
            }
        };
        match self.policy.split_once(':') {
            None if self.policy == "lqr" => Ok(PolicySpec::Lqr),
            None if self.policy == "ddp" => Ok(PolicySpec::Ddp(None)),
            Some(("ddp", p)) => Ok(PolicySpec::Ddp(Some(resolve(p)))),
            Some(("mlp", p)) => Ok(PolicySpec::Mlp(resolve(p))),
            _ => Err(HarnessError::config(format!(
                "policy {:?} is not one of lqr, ddp, ddp:<path>, mlp:<path>",
                self.policy
            ))),
        }
    }

    /// Control period; defaults to the adaptation period.
    pub fn t_ctrl(&self) -> f64 {
        self.sim.t_ctrl.unwrap_or(self.l1.t_s)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HarnessError::config(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        pos("l1.a", self.l1.a)?;
        pos("l1.t_s", self.l1.t_s)?;
        pos("l1.k", self.l1.k)?;
        pos("sim.t_ctrl", self.t_ctrl())?;
        if !(self.sim.duration >= 0.0) {
            return Err(HarnessError::config("sim.duration must be non-negative"));
        }
        if self.l1.t_s > self.t_ctrl() * (1.0 + 1e-9) {
            return Err(HarnessError::config(format!(
                "l1.t_s = {} exceeds the control period {}",
                self.l1.t_s,
                self.t_ctrl()
            )));
        }
        if let Some(limit) = self.input_limit {
            pos("input_limit", limit)?;
        }
        let p = &self.perturbation;
        if let Some(r) = p.lambda {
            check_range("perturbation.lambda", r)?;
            if r[0] <= 0.0 {
                return Err(HarnessError::config(
                    "perturbation.lambda must stay positive",
                ));
            }
        }
        for (k, r) in &p.scales {
            check_range(&format!("perturbation.scales.{k}"), *r)?;
        }
        if let Some(r) = p.wind_mean {
            check_range("perturbation.wind_mean", r)?;
        }
        if let Some(r) = p.propeller_loss {
            check_range("perturbation.propeller_loss", r)?;
        }
        if p.wind_std_fraction < 0.0 || !(p.wind_period > 0.0) {
            return Err(HarnessError::config(
                "wind_std_fraction must be ≥ 0 and wind_period > 0",
            ));
        }
        if self.plant != PlantName::Quadrotor
            && (p.wind_mean.is_some() || p.propeller_loss.is_some())
        {
            return Err(HarnessError::config(
                "wind and propeller perturbations need plant = \"quadrotor\"",
            ));
        }
        if let Some(g) = &self.grid {
            if g.lambda.iter().any(|&l| !(l > 0.0)) {
                return Err(HarnessError::config("grid.lambda entries must be positive"));
            }
        }
        self.ddp.validate()?;
        match self.policy_spec()? {
            PolicySpec::Mlp(path) | PolicySpec::Ddp(Some(path)) if !path.exists() => Err(
                HarnessError::config(format!("policy file {} does not exist", path.display())),
            ),
            PolicySpec::Ddp(_) if self.plant != PlantName::Quadrotor => Err(HarnessError::config(
                "the ddp policy is only defined for the quadrotor",
            )),
            _ => Ok(()),
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut cfg = ScenarioConfig::from_toml(&text)
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    cfg.validate()?;
    Ok(cfg)
}

/// Quadrotor robustness suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadSuiteConfig {
    pub seed: u64,
    pub scenarios: usize,
    pub suites: Vec<String>,
    pub t_ctrl: f64,
    /// Defaults to the optimization horizon `horizon · dt`.
    pub duration: Option<f64>,
    pub propeller_range: [f64; 2],
    pub mass_range: [f64; 2],
    pub wind_mean: [f64; 2],
    pub wind_std_fraction: f64,
    pub wind_period: f64,
    pub l1: L1Section,
    pub ddp: DdpSection,
}

impl Default for QuadSuiteConfig {
    fn default() -> Self {
        Self {
            seed: 2022,
            scenarios: 10,
            suites: vec![
                "propeller".into(),
                "mass-inertia".into(),
                "wind".into(),
                "joint".into(),
            ],
            t_ctrl: 0.001,
            duration: None,
            propeller_range: [0.5, 1.0],
            mass_range: [2.0, 5.0],
            wind_mean: [10.0, 25.0],
            wind_std_fraction: 0.2,
            wind_period: 0.1,
            l1: L1Section::default(),
            ddp: DdpSection::default(),
        }
    }
}

impl QuadSuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn duration(&self) -> f64 {
        self.duration
            .unwrap_or(self.ddp.horizon as f64 * self.ddp.dt)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("propeller_range", self.propeller_range)?;
        check_range("mass_range", self.mass_range)?;
        check_range("wind_mean", self.wind_mean)?;
        if self.scenarios == 0 {
            return Err(HarnessError::config("scenarios must be at least 1"));
        }
        if !(self.t_ctrl > 0.0) || self.l1.t_s > self.t_ctrl * (1.0 + 1e-9) {
            return Err(HarnessError::config("need 0 < l1.t_s ≤ t_ctrl"));
        }
        for s in &self.suites {
            crate::quad::Suite::parse(s)?;
        }
        self.ddp.validate()
    }
}

pub fn load_quad_suite(path: &Path) -> Result<QuadSuiteConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let cfg = QuadSuiteConfig::from_toml(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Overrides for the ACC safety scenario; unset fields keep the defaults of
/// [`adaug_core::safe::acc::AccScenarioConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccSection {
    pub duration: Option<f64>,
    pub t_qp: Option<f64>,
    pub t_s: Option<f64>,
    pub a: Option<f64>,
    pub c1: Option<f64>,
    pub p_slack: Option<f64>,
    pub beta_margin: Option<f64>,
}

impl AccSection {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn apply(&self, cfg: &mut adaug_core::safe::acc::AccScenarioConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(duration, t_qp, t_s, a, c1, p_slack, beta_margin);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = ScenarioConfig::from_toml("plant = \"pendubot\"").unwrap();
        assert_eq!(cfg.policy_spec().unwrap(), PolicySpec::Lqr);
        assert_eq!(cfg.l1, L1Section::default());
        assert_eq!(cfg.t_ctrl(), cfg.l1.t_s);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.perturbation.lambda = Some([0.3, 1.0]);
        cfg.perturbation
            .scales
            .insert("m1_scale".into(), [1.0, 6.0]);
        cfg.grid = Some(GridSection {
            lambda: vec![1.0, 0.5],
            scales: BTreeMap::from([("m2_scale".into(), vec![1.0, 2.0])]),
        });
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScenarioConfig::from_toml("plant = \"boat\"").is_err());
        assert!(ScenarioConfig::from_toml("plant = \"pendubot\"\nbogus = 1").is_err());
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.perturbation.lambda = Some([1.0, 0.3]);
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.policy = "ddp".into();
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.policy = "mlp:/nonexistent/policy.json".into();
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.sim.t_ctrl = Some(0.0005);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_policy_paths_resolve_against_the_file() {
        let mut cfg = ScenarioConfig::new(PlantName::Pendubot);
        cfg.policy = "mlp:nets/p.json".into();
        cfg.base_dir = Some(PathBuf::from("/cfg"));
        assert_eq!(
            cfg.policy_spec().unwrap(),
            PolicySpec::Mlp(PathBuf::from("/cfg/nets/p.json"))
        );
    }
}
