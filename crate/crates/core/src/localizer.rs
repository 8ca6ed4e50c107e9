//! Shallow classifier from a fingerprint to a reference point.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FingerprintDataset, Point3, RpMap};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, Loss, Network, Targets, TrainConfig, TrainReport};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnnConfig {
    pub input_dim: usize,
    #[serde(default = "default_projection")]
    pub projection: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub classes: usize,
    /// `sigmoid` or `softmax`.
    #[serde(default = "default_output")]
    pub output: Activation,
}

fn default_projection() -> usize {
    128
}

fn default_hidden() -> usize {
    256
}

fn default_output() -> Activation {
    Activation::Sigmoid
}

impl SnnConfig {
    pub fn new(input_dim: usize, classes: usize) -> Self {
        Self {
            input_dim,
            projection: default_projection(),
            hidden: default_hidden(),
            classes,
            output: default_output(),
        }
    }

    pub fn for_dataset(data: &FingerprintDataset) -> Self {
        Self::new(data.ap_count(), data.rp_map().len())
    }

    pub fn with_widths(mut self, projection: usize, hidden: usize) -> Self {
        self.projection = projection;
        self.hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if [self.input_dim, self.projection, self.hidden, self.classes].contains(&0) {
            return Err(Error::InvalidConfig("classifier widths must be at least 1".into()));
        }
        if !matches!(self.output, Activation::Sigmoid | Activation::Softmax) {
            return Err(Error::InvalidConfig("classifier output must be sigmoid or softmax".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.input_dim, self.projection, self.hidden, self.classes]
    }
}

/// `D -> projection (relu) -> hidden (relu) -> C (sigmoid or softmax)`.
pub fn build_snn(cfg: &SnnConfig, seed: u64) -> Result<Network> {
    cfg.validate()?;
    Network::dense(
        &cfg.dims(),
        &[Activation::Relu, Activation::Relu, cfg.output],
        &mut seed::rng(seed),
    )
}

fn check_classes(net: &Network, data: &FingerprintDataset) -> Result<()> {
    if net.output_dim() != Some(data.rp_map().len()) {
        return Err(Error::DimensionMismatch {
            expected: data.rp_map().len(),
            got: net.output_dim().unwrap_or(0),
        });
    }
    Ok(())
}

/// Trains the global model with sparse categorical cross-entropy.
pub fn train_offline(net: &mut Network, data: &FingerprintDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    check_classes(net, data)?;
    let cfg = TrainConfig {
        loss: Loss::SparseCategoricalCrossentropy,
        ..cfg.clone()
    };
    nn::sgd_train(net, &data.features(), Targets::Classes(&data.classes()), &cfg)
}

/// Clones `gm` and retrains the copy on one client's data.
pub fn retrain_local(gm: &Network, local: &FingerprintDataset, cfg: &TrainConfig) -> Result<Network> {
    let mut lm = gm.clone();
    if local.is_empty() {
        log::warn!("client has no local data, returning the global model unchanged");
        return Ok(lm);
    }
    train_offline(&mut lm, local, cfg)?;
    Ok(lm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub rp_id: String,
    pub scores: Vec<f64>,
    pub location: Point3,
}

/// Index of the largest score, lowest index on ties. NaN never wins.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.map_or(true, |b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn predict(net: &Network, rss: &[f64], rp_map: &RpMap) -> Result<Prediction> {
    let scores = net.forward(rss)?;
    let class = argmax(&scores).ok_or(Error::Empty("class scores"))?;
    let (rp_id, location) = rp_map.by_class(class).ok_or(Error::UnknownClass {
        index: class,
        classes: rp_map.len(),
    })?;
    Ok(Prediction {
        class,
        rp_id: rp_id.to_owned(),
        scores,
        location,
    })
}

/// Euclidean distance in metres.
pub fn localization_error(truth: Point3, pred: Point3) -> f64 {
    truth.distance(&pred)
}

/// Localization error of every sample, in dataset order.
pub fn evaluate(net: &Network, data: &FingerprintDataset) -> Result<Vec<f64>> {
    let map = data.rp_map();
    data.samples()
        .iter()
        .map(|s| {
            let truth = map.get(&s.rp_id).ok_or_else(|| Error::UnknownRp(s.rp_id.clone()))?;
            Ok(localization_error(truth, predict(net, &s.rss, map)?.location))
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    snn: SnnConfig,
    rp_map: RpMap,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes `<path>` as a weight snapshot and `<path>.json` (extension
/// replaced) with the classifier widths and the RP map.
pub fn save_checkpoint(path: impl AsRef<Path>, net: &Network, cfg: &SnnConfig, rp_map: &RpMap) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    nn::write_snapshot(net, &mut w)?;
    std::io::Write::flush(&mut w)?;
    let sidecar = Sidecar {
        snn: cfg.clone(),
        rp_map: rp_map.clone(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, SnnConfig, RpMap)> {
    let path = path.as_ref();
    let net = nn::read_snapshot(BufReader::new(File::open(path)?))?;
    let sidecar: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    if net.input_dim() != Some(sidecar.snn.input_dim) || net.output_dim() != Some(sidecar.snn.classes) {
        return Err(Error::Codec("checkpoint weights disagree with the sidecar widths".into()));
    }
    if sidecar.rp_map.len() != sidecar.snn.classes {
        return Err(Error::LengthMismatch {
            expected: sidecar.snn.classes,
            got: sidecar.rp_map.len(),
        });
    }
    Ok((net, sidecar.snn, sidecar.rp_map))
}
