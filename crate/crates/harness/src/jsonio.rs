//! JSON files for externally trained MLP policies and DDP solutions.
//!
//! MLP policy document:
//!
//! | field | meaning |
//! |---|---|
//! | `layer_sizes` | `[n, h_1, …, m]`, state dimension first |
//! | `weights` | one array per layer, row-major `out × in` |
//! | `biases` | one array per layer, length `out` |
//! | `activation` | hidden activation, `tanh` or `relu` |
//! | `output_activation` | optional, default `linear` |
//! | `output_scale` | per-input multiplier applied last, length `m` |
//! | `state_normalization` | `{ "offset": [n], "scale": [n] }`, input is `(x − offset) / scale` |
//!
//! DDP solution document: `dt`, `n`, `m`, `x_nom` (`N+1` states), `u_nom`
//! (`N` inputs), `gains` (`N` matrices, each row-major `m × n`), `ff`,
//! `cost`, `iterations`, `converged`.

use std::path::Path;

use adaug_core::ddp::DdpSolution;
use adaug_core::policy::{Activation, DenseLayer, MlpPolicy};
use adaug_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateNormalization {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpPolicyFile {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    #[serde(default = "linear")]
    pub output_activation: String,
    pub output_scale: Vec<f64>,
    pub state_normalization: StateNormalization,
}

fn linear() -> String {
    "linear".into()
}

fn field_err(field: String, msg: String) -> HarnessError {
    HarnessError::config(format!("{field}: {msg}"))
}

impl MlpPolicyFile {
    pub fn into_policy(self) -> Result<MlpPolicy> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(field_err(
                "layer_sizes".into(),
                "need at least input and output sizes".into(),
            ));
        }
        let layers = sizes.len() - 1;
        for (name, len) in [
            ("weights", self.weights.len()),
            ("biases", self.biases.len()),
        ] {
            if len != layers {
                return Err(field_err(
                    name.into(),
                    format!("expected {layers} layers, got {len}"),
                ));
            }
        }
        let mut dense = Vec::with_capacity(layers);
        for l in 0..layers {
            let (inp, out) = (sizes[l], sizes[l + 1]);
            if self.weights[l].len() != inp * out {
                return Err(field_err(
                    format!("weights[{l}]"),
                    format!(
                        "expected {out}x{inp} = {} entries, got {}",
                        inp * out,
                        self.weights[l].len()
                    ),
                ));
            }
            if self.biases[l].len() != out {
                return Err(field_err(
                    format!("biases[{l}]"),
                    format!("expected {out} entries, got {}", self.biases[l].len()),
                ));
            }
            dense.push(DenseLayer {
                weights: Matrix::from_row_slice(out, inp, &self.weights[l]),
                biases: Vector::from_column_slice(&self.biases[l]),
            });
        }
        let act = |field: &str, name: &str| {
            Activation::parse(name)
                .map_err(|_| field_err(field.into(), format!("unknown activation {name:?}")))
        };
        let policy = MlpPolicy {
            layers: dense,
            activation: act("activation", &self.activation)?,
            output_activation: act("output_activation", &self.output_activation)?,
            output_scale: Vector::from_vec(self.output_scale),
            state_offset: Vector::from_vec(self.state_normalization.offset),
            state_scale: Vector::from_vec(self.state_normalization.scale),
        };
        policy.validate().map_err(|e| match e {
            adaug_core::Error::Config(msg) => HarnessError::Config(msg),
            other => other.into(),
        })?;
        Ok(policy)
    }

    pub fn from_policy(p: &MlpPolicy) -> Self {
        let mut layer_sizes = vec![p.state_dim()];
        layer_sizes.extend(p.layers.iter().map(|l| l.biases.len()));
        Self {
            layer_sizes,
            weights: p
                .layers
                .iter()
                .map(|l| l.weights.transpose().iter().copied().collect())
                .collect(),
            biases: p
                .layers
                .iter()
                .map(|l| l.biases.iter().copied().collect())
                .collect(),
            activation: p.activation.name().into(),
            output_activation: p.output_activation.name().into(),
            output_scale: p.output_scale.iter().copied().collect(),
            state_normalization: StateNormalization {
                offset: p.state_offset.iter().copied().collect(),
                scale: p.state_scale.iter().copied().collect(),
            },
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        path: path.into(),
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

pub fn load_mlp(path: &Path) -> Result<MlpPolicy> {
    let file: MlpPolicyFile = parse(path, &read(path)?)?;
    file.into_policy()
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
}

pub fn save_mlp(path: &Path, policy: &MlpPolicy) -> Result<()> {
    write(
        path,
        &serde_json::to_string_pretty(&MlpPolicyFile::from_policy(policy))?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpSolutionFile {
    pub dt: f64,
    pub n: usize,
    pub m: usize,
    pub x_nom: Vec<Vec<f64>>,
    pub u_nom: Vec<Vec<f64>>,
    pub gains: Vec<Vec<f64>>,
    pub ff: Vec<Vec<f64>>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DdpSolutionFile {
    pub fn from_solution(s: &DdpSolution) -> Self {
        let n = s.x_nominal.first().map_or(0, |x| x.len());
        let m = s.u_nominal.first().map_or(0, |u| u.len());
        let vecs = |v: &[Vector]| v.iter().map(|x| x.iter().copied().collect()).collect();
        Self {
            dt: s.dt,
            n,
            m,
            x_nom: vecs(&s.x_nominal),
            u_nom: vecs(&s.u_nominal),
            gains: s
                .gains
                .iter()
                .map(|k| k.transpose().iter().copied().collect())
                .collect(),
            ff: vecs(&s.ff),
            cost: s.cost,
            iterations: s.iterations,
            converged: s.converged,
        }
    }

    pub fn into_solution(self) -> Result<DdpSolution> {
        let steps = self.u_nom.len();
        let bad = |msg: String| Err(HarnessError::config(msg));
        if self.x_nom.len() != steps + 1 || self.gains.len() != steps || self.ff.len() != steps {
            return bad(format!(
                "expected {} states and {steps} inputs, gains and feedforward terms",
                steps + 1
            ));
        }
        if let Some(i) = self.x_nom.iter().position(|x| x.len() != self.n) {
            return bad(format!("x_nom[{i}] must have {} entries", self.n));
        }
        if let Some(i) = self
            .u_nom
            .iter()
            .chain(&self.ff)
            .position(|u| u.len() != self.m)
        {
            return bad(format!("u_nom/ff entry {i} must have {} entries", self.m));
        }
        if let Some(i) = self.gains.iter().position(|k| k.len() != self.m * self.n) {
            return bad(format!("gains[{i}] must have {} entries", self.m * self.n));
        }
        let vecs = |v: Vec<Vec<f64>>| v.into_iter().map(Vector::from_vec).collect();
        Ok(DdpSolution {
            dt: self.dt,
            gains: self
                .gains
                .iter()
                .map(|k| Matrix::from_row_slice(self.m, self.n, k))
                .collect(),
            x_nominal: vecs(self.x_nom),
            u_nominal: vecs(self.u_nom),
            ff: vecs(self.ff),
            cost: self.cost,
            iterations: self.iterations,
            converged: self.converged,
        })
    }
}

pub fn load_ddp_solution(path: &Path) -> Result<DdpSolution> {
    let file: DdpSolutionFile = parse(path, &read(path)?)?;
    file.into_solution()
        .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
}

pub fn save_ddp_solution(path: &Path, s: &DdpSolution) -> Result<()> {
    write(
        path,
        &serde_json::to_string(&DdpSolutionFile::from_solution(s))?,
    )
}
