//! Dense feed-forward networks with hand-written backpropagation and Adam.
//!
//! Batches are row-major: one sample per row. A layer computes
//! `act(x · Wᵀ + b)` with `W` shaped `out × in`.

mod adam;
mod io;
mod loss;
mod train;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use adam::{AdamConfig, AdamState};
pub use io::{read_network, write_history_csv, write_network, NETWORK_FORMAT_VERSION};
pub(crate) use io::NetworkRecord;
pub use loss::{Loss, Objective};
pub use train::{train, EpochLoss, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Identity => {}
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Activations of every layer; index 0 is the input batch.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    /// Gradient with respect to the network input.
    pub input: Array2<f64>,
}

impl Network {
    /// Glorot-uniform weights, zero biases, deterministic per seed.
    pub fn new(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "network needs at least two non-zero layer sizes, got {dims:?}"
            )));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations given for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }
        let mut rng = seed::rng(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..=limit));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Network { layers, seed })
    }

    /// Hidden layers use `hidden`, the last layer uses `output`.
    pub fn mlp(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        let n = dims.len().saturating_sub(1);
        let acts: Vec<_> = (0..n)
            .map(|i| if i + 1 == n { output } else { hidden })
            .collect();
        Network::new(dims, &acts, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<ForwardPass> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &self.layers {
            let prev = activations.last().expect("input pushed");
            let mut z = prev.dot(&layer.weights.t());
            z += &layer.bias;
            layer.activation.apply(&mut z);
            activations.push(z);
        }
        Ok(ForwardPass { activations })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.activations.pop().expect("output"))
    }

    /// Exact gradients of a scalar loss given `upstream = dL/d(output)`.
    pub fn backward(&self, pass: &ForwardPass, upstream: &Array2<f64>) -> Gradients {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &pass.activations[i + 1];
            if layer.activation != Activation::Identity {
                Zip::from(&mut delta)
                    .and(out)
                    .for_each(|d, &y| *d *= layer.activation.derivative_from_output(y));
            }
            let input = &pass.activations[i];
            grads.push(LayerGrad {
                weights: delta.t().dot(input),
                bias: delta.sum_axis(Axis(0)),
            });
            delta = delta.dot(&layer.weights);
        }
        grads.reverse();
        Gradients {
            layers: grads,
            input: delta,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Vec<LayerGrad> {
        net.layers
            .iter()
            .map(|l| LayerGrad {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: Array1::zeros(l.bias.raw_dim()),
            })
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod gradcheck;
