use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{log_sigmoid, Activation, ForwardCache, Network, WeightVector};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean over output units of the squared error.
    Mse,
    /// Negative log-probability of the true class. With a sigmoid output the
    /// scores are renormalized to sum to one first.
    SparseCategoricalCrossentropy,
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Dense(&'a [Vec<f64>]),
    Classes(&'a [usize]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Dense(t) => t.len(),
            Targets::Classes(t) => t.len(),
        }
    }
}

fn default_batch_size() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub loss: Loss,
    /// Layers whose parameters are left untouched by updates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_layers: Vec<usize>,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, loss: Loss) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size: default_batch_size(),
            seed: 0,
            loss,
            frozen_layers: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean sample loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Scratch space for one network's backward passes.
struct Backprop {
    cache: ForwardCache,
    delta: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

impl Backprop {
    fn new(net: &Network) -> Self {
        let mut offsets = Vec::with_capacity(net.layers().len());
        let mut acc = 0;
        for l in net.layers() {
            offsets.push(acc);
            acc += l.param_count();
        }
        Self {
            cache: ForwardCache::for_network(net),
            delta: net.layers().iter().map(|l| vec![0.0; l.out_dim()]).collect(),
            offsets,
        }
    }
}

#[derive(Clone, Copy)]
enum Target<'a> {
    Dense(&'a [f64]),
    Class(usize),
}

fn target_at<'a>(targets: &Targets<'a>, i: usize) -> Target<'a> {
    match targets {
        Targets::Dense(t) => Target::Dense(&t[i]),
        Targets::Classes(c) => Target::Class(c[i]),
    }
}

fn check_problem(net: &Network, inputs: &[Vec<f64>], targets: &Targets, loss: Loss) -> Result<()> {
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let (Some(in_dim), Some(out_dim)) = (net.input_dim(), net.output_dim()) else {
        return Err(Error::InvalidConfig("network has no layers".into()));
    };
    if let Some(x) = inputs.iter().find(|x| x.len() != in_dim) {
        return Err(Error::DimensionMismatch {
            expected: in_dim,
            got: x.len(),
        });
    }
    match (loss, targets) {
        (Loss::Mse, Targets::Dense(t)) => {
            if let Some(y) = t.iter().find(|y| y.len() != out_dim) {
                return Err(Error::DimensionMismatch {
                    expected: out_dim,
                    got: y.len(),
                });
            }
        }
        (Loss::SparseCategoricalCrossentropy, Targets::Classes(c)) => {
            let act = net.layers().last().expect("non-empty").activation;
            if !matches!(act, Activation::Sigmoid | Activation::Softmax) {
                return Err(Error::InvalidConfig(
                    "cross-entropy needs a sigmoid or softmax output layer".into(),
                ));
            }
            if let Some(&bad) = c.iter().find(|&&c| c >= out_dim) {
                return Err(Error::UnknownClass {
                    index: bad,
                    classes: out_dim,
                });
            }
        }
        _ => {
            return Err(Error::InvalidConfig(
                "MSE needs dense targets, cross-entropy needs class targets".into(),
            ))
        }
    }
    Ok(())
}

/// Forward + backward for one sample. Adds dLoss/dparams into `grad`
/// (canonical order) and returns the sample loss.
fn accumulate(net: &Network, x: &[f64], target: Target, loss: Loss, bp: &mut Backprop, grad: &mut [f64]) -> f64 {
    net.forward_cached(x, &mut bp.cache);
    let last = net.layers().len() - 1;
    let out_layer = &net.layers()[last];
    let a = &bp.cache.post[last];
    let z = &bp.cache.pre[last];
    let dz = &mut bp.delta[last];

    let sample_loss = match (loss, target) {
        (Loss::Mse, Target::Dense(t)) => {
            let m = a.len() as f64;
            let mut l = 0.0;
            for ((d, &av), &tv) in dz.iter_mut().zip(a).zip(t) {
                let e = av - tv;
                l += e * e;
                *d = 2.0 * e / m;
            }
            out_layer.activation.backward(a, dz);
            l / m
        }
        (Loss::SparseCategoricalCrossentropy, Target::Class(label)) => match out_layer.activation {
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                dz.copy_from_slice(a);
                dz[label] -= 1.0;
                lse - z[label]
            }
            Activation::Sigmoid => {
                let total: f64 = a.iter().sum();
                for (d, &s) in dz.iter_mut().zip(a) {
                    *d = s * (1.0 - s) / total;
                }
                dz[label] -= 1.0 - a[label];
                total.ln() - log_sigmoid(z[label])
            }
            _ => unreachable!("checked by check_problem"),
        },
        _ => unreachable!("checked by check_problem"),
    };

    for l in (0..=last).rev() {
        let layer = &net.layers()[l];
        let (lower, upper) = bp.delta.split_at_mut(l);
        let delta = &upper[0];
        let input: &[f64] = if l == 0 { x } else { &bp.cache.post[l - 1] };
        let in_dim = layer.in_dim();
        let off = bp.offsets[l];
        let (gw, gb) = grad[off..off + layer.param_count()].split_at_mut(in_dim * layer.out_dim());
        for (o, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                for (g, &xi) in gw[o * in_dim..(o + 1) * in_dim].iter_mut().zip(input) {
                    *g += d * xi;
                }
            }
            gb[o] += d;
        }
        if l > 0 {
            let prev = &mut lower[l - 1];
            prev.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (p, &w) in prev.iter_mut().zip(&layer.weights[o * in_dim..(o + 1) * in_dim]) {
                        *p += d * w;
                    }
                }
            }
            net.layers()[l - 1].activation.backward(&bp.cache.post[l - 1], prev);
        }
    }
    sample_loss
}

/// Mean loss and mean gradient over the given sample indices, summed in the
/// order given.
fn batch_gradient(
    net: &Network,
    inputs: &[Vec<f64>],
    targets: &Targets,
    loss: Loss,
    indices: &[usize],
    bp: &mut Backprop,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut total = 0.0;
    for &i in indices {
        total += accumulate(net, &inputs[i], target_at(targets, i), loss, bp, grad);
    }
    let scale = 1.0 / indices.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    total * scale
}

/// Mean batch loss and its exact gradient, flattened canonically.
pub fn loss_and_gradient(net: &Network, inputs: &[Vec<f64>], targets: Targets, loss: Loss) -> Result<(f64, WeightVector)> {
    if inputs.is_empty() {
        return Err(Error::Empty("gradient batch"));
    }
    check_problem(net, inputs, &targets, loss)?;
    let mut bp = Backprop::new(net);
    let mut grad = vec![0.0; net.param_count()];
    let indices: Vec<usize> = (0..inputs.len()).collect();
    let l = batch_gradient(net, inputs, &targets, loss, &indices, &mut bp, &mut grad);
    Ok((l, WeightVector::with_shape(grad, net.shape())?))
}

pub fn gradient(net: &Network, inputs: &[Vec<f64>], targets: Targets, loss: Loss) -> Result<WeightVector> {
    loss_and_gradient(net, inputs, targets, loss).map(|(_, g)| g)
}

pub fn mean_loss(net: &Network, inputs: &[Vec<f64>], targets: Targets, loss: Loss) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    check_problem(net, inputs, &targets, loss)?;
    let mut bp = Backprop::new(net);
    let mut scratch = vec![0.0; net.param_count()];
    let mut total = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        total += accumulate(net, x, target_at(&targets, i), loss, &mut bp, &mut scratch);
    }
    Ok(total / inputs.len() as f64)
}

/// Mini-batch SGD: `epochs x ceil(N / batch)` steps of `W <- W - lr * grad`.
/// Sample order is reshuffled each epoch from `cfg.seed`; indices inside a
/// batch are visited in ascending order so a full batch reproduces
/// [`gradient`] exactly.
pub fn sgd_train(net: &mut Network, inputs: &[Vec<f64>], targets: Targets, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok(report);
    }
    if inputs.is_empty() {
        return Err(Error::Empty("training data"));
    }
    check_problem(net, inputs, &targets, cfg.loss)?;
    if let Some(&bad) = cfg.frozen_layers.iter().find(|&&l| l >= net.layers().len()) {
        return Err(Error::InvalidConfig(format!("frozen layer {bad} does not exist")));
    }

    let mut rng = seed::rng(cfg.seed);
    let mut bp = Backprop::new(net);
    let mut grad = vec![0.0; net.param_count()];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend_from_slice(chunk);
            batch.sort_unstable();
            let l = batch_gradient(net, inputs, &targets, cfg.loss, &batch, &mut bp, &mut grad);
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NanLoss { epoch, batch: b });
            }
            epoch_total += l * batch.len() as f64;
            apply_step(net, &grad, cfg, &bp.offsets);
        }
        report.epoch_losses.push(epoch_total / inputs.len() as f64);
    }
    Ok(report)
}

fn apply_step(net: &mut Network, grad: &[f64], cfg: &TrainConfig, offsets: &[usize]) {
    let lr = cfg.learning_rate;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        if cfg.frozen_layers.contains(&l) {
            continue;
        }
        let g = &grad[offsets[l]..offsets[l] + layer.param_count()];
        let (gw, gb) = g.split_at(layer.weights.len());
        for (w, d) in layer.weights.iter_mut().zip(gw) {
            *w -= lr * d;
        }
        for (b, d) in layer.bias.iter_mut().zip(gb) {
            *b -= lr * d;
        }
    }
}
