use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, FeedForwardNet, Layer};
use crate::error::{validation, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Weight sparsity penalty, only used by autoencoder pretraining.
    pub l1_lambda: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; `None`
    /// disables early stopping.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.3,
            batch_size: 16,
            max_epochs: 20,
            l1_lambda: 0.0,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(validation(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(validation(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.l1_lambda >= 0.0 && self.l1_lambda.is_finite()) {
            return Err(validation(format!("l1_lambda must be non-negative, got {}", self.l1_lambda)));
        }
        if self.batch_size == 0 {
            return Err(validation("batch size must be positive"));
        }
        Ok(())
    }
}

/// Gradient with the same layout as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradient {
    /// Flattened in the same order as [`FeedForwardNet::parameters`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

fn check_pairs(net: &FeedForwardNet, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<()> {
    if inputs.nrows() != targets.nrows() {
        return Err(validation(format!(
            "input and target row counts differ: {} vs {}",
            inputs.nrows(),
            targets.nrows()
        )));
    }
    if inputs.ncols() != net.input_dim() || targets.ncols() != net.output_dim() {
        return Err(validation(format!(
            "data dims {}→{} do not fit network {:?}",
            inputs.ncols(),
            targets.ncols(),
            net.dims()
        )));
    }
    Ok(())
}

fn l1_norm(net: &FeedForwardNet) -> f64 {
    net.layers().iter().map(|l| l.weights.iter().map(|w| w.abs()).sum::<f64>()).sum()
}

fn signum0(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Returns the squared-error part of the loss and the full gradient.
fn backprop(net: &FeedForwardNet, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, l1: f64) -> (f64, Gradient) {
    let acts = net.activations(inputs);
    let layers = net.layers();
    let mut delta = acts.last().expect("output") - &targets;
    let sse = 0.5 * delta.iter().map(|d| d * d).sum::<f64>();
    let mut weights = Vec::with_capacity(layers.len());
    let mut biases = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate().rev() {
        if layer.activation == Activation::Tanh {
            delta.zip_mut_with(&acts[i + 1], |d, a| *d *= 1.0 - a * a);
        }
        let mut gw = delta.t().dot(&acts[i]);
        if l1 > 0.0 {
            gw.zip_mut_with(&layer.weights, |g, w| *g += l1 * signum0(*w));
        }
        biases.push(delta.sum_axis(Axis(0)));
        weights.push(gw);
        if i > 0 {
            delta = delta.dot(&layer.weights);
        }
    }
    weights.reverse();
    biases.reverse();
    (sse, Gradient { weights, biases })
}

/// Loss `½ Σ‖y − t‖² + λ Σ|w|` over all rows, and its gradient. Biases are
/// not penalized and the subgradient of `|w|` at zero is zero.
pub fn loss_and_gradient(net: &FeedForwardNet, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, l1_lambda: f64) -> Result<(f64, Gradient)> {
    check_pairs(net, inputs, targets)?;
    let (sse, grad) = backprop(net, inputs, targets, l1_lambda);
    let penalty = if l1_lambda > 0.0 { l1_lambda * l1_norm(net) } else { 0.0 };
    Ok((sse + penalty, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean squared error per output value, accumulated over the epoch's
    /// minibatches before each update.
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: FeedForwardNet,
    pub epochs: Vec<EpochStats>,
}

fn mse(net: &FeedForwardNet, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> f64 {
    let y = net.forward_batch(inputs).expect("dims checked");
    let n = (targets.len()).max(1) as f64;
    (&y - &targets).iter().map(|d| d * d).sum::<f64>() / n
}

fn fit(
    mut net: FeedForwardNet,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    validation_set: Option<(ArrayView2<'_, f64>, ArrayView2<'_, f64>)>,
    config: &TrainConfig,
    l1: f64,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_pairs(&net, inputs, targets)?;
    if let Some((vi, vt)) = validation_set {
        check_pairs(&net, vi, vt)?;
    }
    if inputs.nrows() == 0 {
        return Err(validation("no training rows"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();
    let mut velocity: Vec<(Array2<f64>, Array1<f64>)> = net
        .layers()
        .iter()
        .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
        .collect();
    let mut epochs = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, FeedForwardNet)> = None;
    let mut stale = 0;
    let scale = 1.0 / targets.ncols().max(1) as f64;
    for epoch in 0..config.max_epochs {
        if config.batch_size < order.len() {
            order.shuffle(&mut rng);
        }
        let mut sse_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let bx = inputs.select(Axis(0), chunk);
            let bt = targets.select(Axis(0), chunk);
            let (sse, grad) = backprop(&net, bx.view(), bt.view(), l1);
            if !sse.is_finite() {
                return Err(Error::Training(format!("loss became non-finite in epoch {}", epoch + 1)));
            }
            sse_total += sse;
            for ((layer, (vw, vb)), (gw, gb)) in net
                .layers_mut()
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(grad.weights.iter().zip(&grad.biases))
            {
                vw.zip_mut_with(gw, |v, g| *v = config.momentum * *v - config.learning_rate * g);
                vb.zip_mut_with(gb, |v, g| *v = config.momentum * *v - config.learning_rate * g);
                layer.weights += &*vw;
                layer.bias += &*vb;
            }
        }
        let train_mse = 2.0 * sse_total * scale / inputs.nrows() as f64;
        let validation_mse = validation_set.map(|(vi, vt)| mse(&net, vi, vt));
        if let Some(v) = validation_mse {
            if !v.is_finite() {
                return Err(Error::Training(format!("validation error became non-finite in epoch {}", epoch + 1)));
            }
        }
        log::debug!("epoch {}: train mse {train_mse:.6} validation {validation_mse:?}", epoch + 1);
        epochs.push(EpochStats {
            train_mse,
            validation_mse,
        });
        if let (Some(patience), Some(v)) = (config.patience, validation_mse) {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, net.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    if let Some((_, best_net)) = best {
        net = best_net;
    }
    Ok(TrainOutcome { net, epochs })
}

/// Supervised training with momentum SGD on summed squared error.
pub fn train(net: FeedForwardNet, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<TrainOutcome> {
    fit(net, inputs, targets, None, config, 0.0)
}

/// As [`train`], tracking validation error and stopping early when
/// `config.patience` is set. The returned net is the best one on validation.
pub fn train_with_validation(
    net: FeedForwardNet,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    val_inputs: ArrayView2<'_, f64>,
    val_targets: ArrayView2<'_, f64>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    fit(net, inputs, targets, Some((val_inputs, val_targets)), config, 0.0)
}

/// Trains the network to reconstruct `reconstruction_targets` from `inputs`
/// under an L1 penalty on the weights. The returned net carries no penalty
/// state and keeps its architecture.
pub fn pretrain_autoencoder(
    net: FeedForwardNet,
    inputs: ArrayView2<'_, f64>,
    reconstruction_targets: ArrayView2<'_, f64>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if config.l1_lambda == 0.0 {
        log::warn!("autoencoder pretraining with l1_lambda = 0 is a plain autoencoder");
    }
    fit(net, inputs, reconstruction_targets, None, config, config.l1_lambda)
}

/// Discriminative layer-wise pretraining. Hidden layers are taken from `net`
/// one at a time; each stage trains for `config.max_epochs` with a temporary
/// random linear output layer, except the last stage, which uses `net`'s own
/// output layer. The result has the same architecture as `net`.
pub fn pretrain_dlp(net: FeedForwardNet, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    check_pairs(&net, inputs, targets)?;
    let mut template = net.into_layers();
    let output = template.pop().expect("at least one layer");
    let hidden_count = template.len();
    if hidden_count == 0 {
        return fit(FeedForwardNet::new(vec![output])?, inputs, targets, None, config, 0.0);
    }
    let mut trained: Vec<Layer> = Vec::with_capacity(hidden_count);
    let mut epochs = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_D1F0);
    for (stage, layer) in template.into_iter().enumerate() {
        let top = if stage + 1 == hidden_count {
            output.clone()
        } else {
            Layer::random(layer.output_dim(), output.output_dim(), Activation::Linear, &mut rng)
        };
        let mut layers = trained.clone();
        layers.push(layer);
        layers.push(top);
        let stage_config = TrainConfig {
            seed: config.seed.wrapping_add(stage as u64),
            ..config.clone()
        };
        let out = fit(FeedForwardNet::new(layers)?, inputs, targets, None, &stage_config, 0.0)?;
        log::info!("pretraining stage {}/{hidden_count} done", stage + 1);
        epochs.extend(out.epochs);
        let mut layers = out.net.into_layers();
        if stage + 1 == hidden_count {
            return Ok(TrainOutcome {
                net: FeedForwardNet::new(layers)?,
                epochs,
            });
        }
        layers.pop();
        trained = layers;
    }
    unreachable!("loop returns on the final stage")
}
