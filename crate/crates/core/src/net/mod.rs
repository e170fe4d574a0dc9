//! Feed-forward network engine: tanh hidden layers, a linear output layer,
//! momentum SGD, and two pretraining schemes.

mod io;
mod norm;
mod train;

pub use io::{read_net, write_net, NET_MAGIC, NET_VERSION};
pub use norm::{NetModel, Standardizer};
pub use train::{
    loss_and_gradient, pretrain_autoencoder, pretrain_dlp, train, train_with_validation, EpochStats, Gradient, TrainConfig,
    TrainOutcome,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    pub(crate) fn tag(self) -> u32 {
        match self {
            Activation::Linear => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }
}

/// Affine map followed by an activation. Weights are `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() || weights.is_empty() {
            return Err(validation(format!(
                "layer weights {:?} disagree with bias length {}",
                weights.dim(),
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn random(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-r..=r));
        Self {
            weights,
            bias: Array1::zeros(fan_out),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn forward(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t()) + &self.bias;
        self.activation.apply(&mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    layers: Vec<Layer>,
}

impl FeedForwardNet {
    /// Checks that dimensions chain, hidden layers are tanh and the output
    /// layer is linear.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(validation("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(validation(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        let last = layers.len() - 1;
        for (i, l) in layers.iter().enumerate() {
            let expected = if i == last { Activation::Linear } else { Activation::Tanh };
            if l.activation != expected {
                return Err(validation(format!("layer {i} must use {expected:?} activation")));
            }
        }
        Ok(Self { layers })
    }

    /// Random network for `dims = [input, hidden..., output]`.
    pub fn init_random(dims: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(dims, &mut rng)
    }

    pub(crate) fn init_with_rng(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(validation(format!("invalid layer dimensions {dims:?}")));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Linear } else { Activation::Tanh };
                Layer::random(w[0], w[1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(validation(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let out = self.forward_batch(x.insert_axis(Axis(0)))?;
        Ok(out.row(0).to_owned())
    }

    /// Runs every row of `inputs` through the network.
    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(validation(format!(
                "input has {} dims, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let mut a = self.layers[0].forward(inputs);
        for l in &self.layers[1..] {
            a = l.forward(a.view());
        }
        Ok(a)
    }

    /// Activations of every layer, input first.
    pub(crate) fn activations(&self, inputs: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.to_owned());
        for l in &self.layers {
            let next = l.forward(acts.last().expect("non-empty").view());
            acts.push(next);
        }
        acts
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub(crate) fn into_layers(self) -> Vec<Layer> {
        self.layers
    }
}

#[cfg(test)]
mod tests;
