//! Feed-forward MLP policy evaluator. File IO lives in the harness crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::Policy;
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Self::Tanh),
            "relu" => Ok(Self::Relu),
            "linear" | "identity" => Ok(Self::Linear),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::Linear => "linear",
        }
    }

    fn apply(self, v: &mut Vector) {
        match self {
            Self::Tanh => v.apply(|z| *z = z.tanh()),
            Self::Relu => v.apply(|z| *z = z.max(0.0)),
            Self::Linear => {}
        }
    }
}

/// `y = W x + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub biases: Vector,
}

/// `u = output_scale ⊙ act_out(W_L … act(W_1 (x − offset) / scale + b_1) … + b_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
    pub output_activation: Activation,
    pub output_scale: Vector,
    pub state_offset: Vector,
    pub state_scale: Vector,
}

impl MlpPolicy {
    /// Checks layer chaining, vector lengths and scale entries; errors name
    /// the offending field.
    pub fn validate(&self) -> Result<()> {
        let err = |field: String, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.layers.is_empty() {
            return err(
                String::from("layers"),
                String::from("at least one layer required"),
            );
        }
        let n = self.state_offset.len();
        if self.state_scale.len() != n {
            return err(
                String::from("state_normalization.scale"),
                format!(
                    "length {} does not match offset length {n}",
                    self.state_scale.len()
                ),
            );
        }
        if self.state_scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return err(
                String::from("state_normalization.scale"),
                String::from("entries must be finite and nonzero"),
            );
        }
        let mut width = n;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.ncols() != width {
                return err(
                    format!("weights[{i}]"),
                    format!(
                        "expects {} inputs, previous width is {width}",
                        layer.weights.ncols()
                    ),
                );
            }
            if layer.biases.len() != layer.weights.nrows() {
                return err(
                    format!("biases[{i}]"),
                    format!(
                        "length {} does not match {} outputs",
                        layer.biases.len(),
                        layer.weights.nrows()
                    ),
                );
            }
            width = layer.weights.nrows();
        }
        if self.output_scale.len() != width {
            return err(
                String::from("output_scale"),
                format!(
                    "length {} does not match output width {width}",
                    self.output_scale.len()
                ),
            );
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.state_offset.len()
    }

    pub fn forward(&self, x: &Vector) -> Vector {
        let mut h = (x - &self.state_offset).component_div(&self.state_scale);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = &layer.weights * h + &layer.biases;
            if i == last {
                self.output_activation.apply(&mut h);
            } else {
                self.activation.apply(&mut h);
            }
        }
        h.component_mul(&self.output_scale)
    }
}

impl Policy for MlpPolicy {
    fn input_dim(&self) -> usize {
        self.output_scale.len()
    }
    fn eval(&self, _t: f64, x: &Vector) -> Vector {
        self.forward(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn identity_net(n: usize, m: usize) -> MlpPolicy {
        MlpPolicy {
            layers: vec![DenseLayer {
                weights: Matrix::identity(m, n),
                biases: Vector::zeros(m),
            }],
            activation: Activation::Tanh,
            output_activation: Activation::Linear,
            output_scale: Vector::from_element(m, 1.0),
            state_offset: Vector::zeros(n),
            state_scale: Vector::from_element(n, 1.0),
        }
    }

    #[test]
    fn identity_network_truncates_state() {
        let p = identity_net(4, 1);
        p.validate().unwrap();
        let x = Vector::from_column_slice(&[0.3, -1.0, 2.0, 5.0]);
        assert_eq!(p.forward(&x)[0], 0.3);
    }

    #[test]
    fn zero_weights_give_scaled_bias() {
        let mut p = identity_net(3, 2);
        p.layers[0].weights.fill(0.0);
        p.layers[0].biases = Vector::from_column_slice(&[0.5, -2.0]);
        p.output_activation = Activation::Tanh;
        p.output_scale = Vector::from_column_slice(&[4.0, 1.0]);
        let u = p.forward(&Vector::from_column_slice(&[9.0, 9.0, 9.0]));
        assert_eq!(u[0], 4.0 * 0.5f64.tanh());
        assert_eq!(u[1], (-2.0f64).tanh());
    }

    #[test]
    fn relu_hidden_layer() {
        let mut p = identity_net(2, 2);
        p.activation = Activation::Relu;
        p.layers.push(DenseLayer {
            weights: Matrix::identity(1, 2),
            biases: Vector::zeros(1),
        });
        p.output_scale = Vector::from_element(1, 1.0);
        p.validate().unwrap();
        assert_eq!(p.forward(&Vector::from_column_slice(&[-3.0, 1.0]))[0], 0.0);
        assert_eq!(p.forward(&Vector::from_column_slice(&[3.0, 1.0]))[0], 3.0);
    }

    #[test]
    fn shape_errors_name_the_field() {
        let mut p = identity_net(3, 1);
        p.layers[0].biases = Vector::zeros(2);
        let msg = alloc::format!("{}", p.validate().unwrap_err());
        assert!(msg.contains("biases[0]"), "{msg}");
        assert!(Activation::parse("sigmoid").is_err());
    }
}
