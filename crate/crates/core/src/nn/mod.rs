//! Dense MLP engine: layers, activations, losses, backpropagation, SGD and
//! the canonical flat weight layout used by federation.

mod train;
mod weights;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::train::{gradient, loss_and_gradient, mean_loss, sgd_train, Loss, Targets, TrainConfig, TrainReport};
pub use self::weights::{read_snapshot, write_snapshot, LayerShape, NetworkShape, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
    Softmax,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
            Activation::Softmax => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Relu,
            1 => Activation::Sigmoid,
            2 => Activation::Linear,
            3 => Activation::Softmax,
            _ => return None,
        })
    }

    fn apply(self, z: &[f64], out: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = v.max(0.0);
                }
            }
            Activation::Sigmoid => {
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = sigmoid(v);
                }
            }
            Activation::Linear => out.copy_from_slice(z),
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = (v - max).exp();
                    sum += *o;
                }
                for o in out.iter_mut() {
                    *o /= sum;
                }
            }
        }
    }

    /// Turns dL/da into dL/dz in place, given the activation output `a`.
    fn backward(self, a: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (g, &v) in grad.iter_mut().zip(a) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &v) in grad.iter_mut().zip(a) {
                    *g *= v * (1.0 - v);
                }
            }
            Activation::Linear => {}
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(a).map(|(g, v)| g * v).sum();
                for (g, &v) in grad.iter_mut().zip(a) {
                    *g = v * (*g - dot);
                }
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(sigmoid(z)), stable for large |z|.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    /// `out_dim x in_dim`, row-major.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::LengthMismatch {
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::LengthMismatch {
                expected: out_dim,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite layer parameter".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim).max(1) as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.gen_range(-limit..=limit)).collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        (self.in_dim + 1) * self.out_dim
    }

    pub fn shape(&self) -> LayerShape {
        LayerShape {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            activation: self.activation,
        }
    }

    fn affine(&self, x: &[f64], z: &mut [f64]) {
        for ((zo, row), b) in z.iter_mut().zip(self.weights.chunks_exact(self.in_dim.max(1))).zip(&self.bias) {
            *zo = b + dot(row, x);
        }
        if self.in_dim == 0 {
            z.copy_from_slice(&self.bias);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    /// Dense stack `dims[0] -> dims[1] -> ...` with Glorot initialization.
    pub fn dense<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} dims need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| DenseLayer::glorot(d[0], d[1], act, rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<DenseLayer> {
        self.layers
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(|l| l.in_dim)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(|l| l.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape::new(self.layers.iter().map(DenseLayer::shape).collect())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        match self.input_dim() {
            Some(d) if d != x.len() => Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cache = ForwardCache::for_network(self);
        self.forward_cached(x, &mut cache);
        Ok(cache.output(x).to_vec())
    }

    pub(crate) fn forward_cached(&self, x: &[f64], cache: &mut ForwardCache) {
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, rest) = cache.post.split_at_mut(i);
            let input = if i == 0 { x } else { &before[i - 1] };
            layer.affine(input, &mut cache.pre[i]);
            layer.activation.apply(&cache.pre[i], &mut rest[0]);
        }
    }
}

/// Per-layer pre- and post-activation buffers reused across samples.
pub(crate) struct ForwardCache {
    pub(crate) pre: Vec<Vec<f64>>,
    pub(crate) post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub(crate) fn for_network(net: &Network) -> Self {
        Self {
            pre: net.layers.iter().map(|l| vec![0.0; l.out_dim]).collect(),
            post: net.layers.iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }

    pub(crate) fn output<'a>(&'a self, x: &'a [f64]) -> &'a [f64] {
        self.post.last().map_or(x, Vec::as_slice)
    }
}
