//! Sequential dense networks with batched forward/backward passes.
//!
//! Batches are row-major: one sample per row. A layer computes
//! `act(x · Wᵀ + b)` with `W` stored as `out × in`.

mod checkpoint;
pub mod loss;
mod optim;

pub use checkpoint::{NetCheckpoint, NET_FORMAT};
pub use loss::{LossKind, LossSpec, LossValue};
pub use optim::Adam;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("network has no layers")]
    Empty,
    #[error("non-finite parameter in layer {0}")]
    NonFiniteParameter(usize),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and the activation output.
    fn derivative(self, z: f64, out: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self, NnError> {
        if bias.len() != weights.nrows() {
            return Err(NnError::DimensionMismatch {
                expected: weights.nrows(),
                found: bias.len(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn xavier<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output).max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let weights = Array2::from_shape_simple_fn((output, input), || dist.sample(rng));
        Self {
            weights,
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Values recorded by [`DenseNet::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of each layer.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    /// Same order as [`DenseNet::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetCheckpoint", into = "NetCheckpoint")]
pub struct DenseNet {
    layers: Vec<Dense>,
}

impl DenseNet {
    pub fn new(layers: Vec<Dense>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Empty);
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(NnError::DimensionMismatch {
                    expected: w[0].output_dim(),
                    found: w[1].input_dim(),
                });
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(NnError::NonFiniteParameter(i));
            }
        }
        Ok(Self { layers })
    }

    /// `input → hidden[0] → … → output`, hidden layers with `hidden_act`.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        output_act: Activation,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output_act } else { hidden_act };
                Dense::xavier(dims[i], dims[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.predict_batch(batch)?.into_raw_vec_and_offset().0)
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x.ncols())?;
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.weights.t());
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            h = z;
        }
        Ok(h)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Tape, NnError> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.weights.t());
            z += &l.bias;
            let out = z.mapv(|v| l.activation.apply(v));
            inputs.push(h);
            pre.push(z);
            h = out;
        }
        Ok(Tape { inputs, pre, output: h })
    }

    /// Reverse pass from `dL/d output`; returns parameter gradients and
    /// `dL/d input`.
    pub fn backward(&self, tape: &Tape, grad_output: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let z = &tape.pre[i];
            let out = if i + 1 == self.layers.len() {
                &tape.output
            } else {
                &tape.inputs[i + 1]
            };
            let mut dz = g;
            ndarray::Zip::from(&mut dz)
                .and(z)
                .and(out)
                .for_each(|d, &z, &o| *d *= l.activation.derivative(z, o));
            let dw = dz.t().dot(&tape.inputs[i]);
            let db = dz.sum_axis(Axis(0));
            g = dz.dot(&l.weights);
            grads.push((dw, db));
        }
        grads.reverse();
        (Gradients { layers: grads }, g)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights (row-major) then bias, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.flat_params_into(&mut out);
        out
    }

    pub fn flat_params_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.n_params() {
            return Err(NnError::DimensionMismatch {
                expected: self.n_params(),
                found: params.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = params[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = params[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn check_input(&self, found: usize) -> Result<(), NnError> {
        if found != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                found,
            });
        }
        Ok(())
    }
}
