//! Canonical flat weight layout and the binary snapshot record.
//!
//! Flat order is layer-major; within a layer the weight matrix comes first
//! (row-major, `out x in`) followed by the bias vector.
//!
//! Snapshot record (little-endian):
//!
//! ```text
//! magic "FWSN" | version u32 | layer_count u32
//! layer_count x (in_dim u32 | out_dim u32 | activation u8)
//! value_count u64 | value_count x f64
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Network};
use crate::error::{Error, Result};

const SNAPSHOT_MAGIC: &[u8; 4] = b"FWSN";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerShape {
    pub fn param_count(&self) -> usize {
        (self.in_dim + 1) * self.out_dim
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkShape {
    layers: Vec<LayerShape>,
}

impl NetworkShape {
    pub fn new(layers: Vec<LayerShape>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerShape::param_count).sum()
    }

    /// Offset of layer `layer`'s first weight in the flat vector.
    pub fn layer_offset(&self, layer: usize) -> usize {
        self.layers[..layer].iter().map(LayerShape::param_count).sum()
    }

    /// Flat index of weight `(row, col)` of `layer`.
    pub fn weight_index(&self, layer: usize, row: usize, col: usize) -> usize {
        self.layer_offset(layer) + row * self.layers[layer].in_dim + col
    }

    /// Flat index of bias element `row` of `layer`.
    pub fn bias_index(&self, layer: usize, row: usize) -> usize {
        let l = &self.layers[layer];
        self.layer_offset(layer) + l.in_dim * l.out_dim + row
    }
}

/// Flat parameter vector in canonical order. The shape is absent for
/// vectors that never came from a network (e.g. synthetic test inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub shape: Option<NetworkShape>,
}

impl WeightVector {
    pub fn flat(values: Vec<f64>) -> Self {
        Self { values, shape: None }
    }

    pub fn with_shape(values: Vec<f64>, shape: NetworkShape) -> Result<Self> {
        if values.len() != shape.param_count() {
            return Err(Error::LengthMismatch {
                expected: shape.param_count(),
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            shape: Some(shape),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same shape, new values.
    pub fn replaced(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            shape: self.shape.clone(),
        }
    }

    pub fn l2_distance(&self, other: &WeightVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Network {
    pub fn flatten(&self) -> WeightVector {
        let mut values = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            values.extend_from_slice(&layer.weights);
            values.extend_from_slice(&layer.bias);
        }
        WeightVector {
            values,
            shape: Some(self.shape()),
        }
    }

    pub fn unflatten(wv: &WeightVector, shape: &NetworkShape) -> Result<Network> {
        if wv.values.len() != shape.param_count() {
            return Err(Error::LengthMismatch {
                expected: shape.param_count(),
                got: wv.values.len(),
            });
        }
        if let Some(own) = &wv.shape {
            if own != shape {
                return Err(Error::InvalidConfig(
                    "weight vector shape differs from requested shape".into(),
                ));
            }
        }
        let mut rest = wv.values.as_slice();
        let mut layers = Vec::with_capacity(shape.layers.len());
        for l in &shape.layers {
            let (w, tail) = rest.split_at(l.in_dim * l.out_dim);
            let (b, tail) = tail.split_at(l.out_dim);
            layers.push(DenseLayer::new(l.in_dim, l.out_dim, w.to_vec(), b.to_vec(), l.activation)?);
            rest = tail;
        }
        Network::new(layers)
    }

    /// Overwrites all parameters from a flat vector of matching length.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        let mut rest = values;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.bias.len());
            layer.weights.copy_from_slice(w);
            layer.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }
}

pub fn write_snapshot<W: Write>(net: &Network, mut w: W) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&u32_of(net.layers().len())?.to_le_bytes())?;
    for l in net.layers() {
        w.write_all(&u32_of(l.in_dim())?.to_le_bytes())?;
        w.write_all(&u32_of(l.out_dim())?.to_le_bytes())?;
        w.write_all(&[l.activation.tag()])?;
    }
    let flat = net.flatten();
    w.write_all(&(flat.values.len() as u64).to_le_bytes())?;
    for v in &flat.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Network> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Codec("bad snapshot magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Codec(format!("unsupported snapshot version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let activation = Activation::from_tag(tag[0])
            .ok_or_else(|| Error::Codec(format!("unknown activation tag {}", tag[0])))?;
        layers.push(LayerShape {
            in_dim,
            out_dim,
            activation,
        });
    }
    let shape = NetworkShape::new(layers);
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len != shape.param_count() {
        return Err(Error::Codec(format!(
            "snapshot holds {len} values, shape needs {}",
            shape.param_count()
        )));
    }
    let mut values = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Network::unflatten(&WeightVector::flat(values), &shape)
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Codec(format!("{n} does not fit in u32")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
