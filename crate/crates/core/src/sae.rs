//! Stacked autoencoder used to synthesize extra training fingerprints.
//!
//! Three autoencoders are trained greedily:
//!
//! 1. AE1 `D -> h1 -> h1 -> D` on raw fingerprints.
//! 2. AE3 `h1 -> h2 -> h2 -> h1` on AE1 codes (the output of AE1's second layer).
//! 3. AE2 `D -> h1 -> h2 -> h2 -> h1 -> D` assembled from AE1's first and last
//!    layers around AE3's three layers, then fine-tuned on raw fingerprints.
//!
//! AE2 reconstructions become synthetic samples carrying the source label.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Fingerprint, FingerprintDataset};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, DenseLayer, Loss, Network, Targets, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeSpec {
    pub input_dim: usize,
    pub h1: usize,
    pub h2: usize,
}

impl AeSpec {
    /// `D -> ceil(D/2) -> ceil(D/4)`.
    pub fn halving(input_dim: usize) -> Self {
        Self {
            input_dim,
            h1: input_dim.div_ceil(2),
            h2: input_dim.div_ceil(4),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_dim >= self.h1 && self.h1 >= self.h2 && self.h2 >= 1) {
            return Err(Error::InvalidConfig(format!(
                "autoencoder widths must satisfy D >= h1 >= h2 >= 1, got {} / {} / {}",
                self.input_dim, self.h1, self.h2
            )));
        }
        Ok(())
    }
}

/// How the augmenter is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaeMode {
    /// Greedy per-autoencoder training followed by AE2 fine-tuning.
    #[default]
    Layerwise,
    /// AE2's architecture trained end to end from random weights.
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeConfig {
    /// Explicit widths; `None` uses [`AeSpec::halving`] of the input width.
    #[serde(default)]
    pub spec: Option<AeSpec>,
    #[serde(default)]
    pub mode: SaeMode,
    pub ae1_epochs: usize,
    pub ae3_epochs: usize,
    pub ae2_epochs: usize,
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Keep AE2's layers borrowed from AE1 fixed during fine-tuning.
    #[serde(default)]
    pub freeze_borrowed: bool,
    /// Synthetic samples generated per original.
    #[serde(default = "default_multiplicity")]
    pub multiplicity: usize,
}

fn default_batch() -> usize {
    32
}

fn default_multiplicity() -> usize {
    1
}

impl Default for SaeConfig {
    fn default() -> Self {
        Self {
            spec: None,
            mode: SaeMode::Layerwise,
            ae1_epochs: 700,
            ae3_epochs: 700,
            ae2_epochs: 700,
            learning_rate: 0.05,
            batch_size: default_batch(),
            freeze_borrowed: false,
            multiplicity: 1,
        }
    }
}

impl SaeConfig {
    pub fn with_epochs(mut self, per_phase: usize) -> Self {
        self.ae1_epochs = per_phase;
        self.ae3_epochs = per_phase;
        self.ae2_epochs = per_phase;
        self
    }

    fn phase(&self, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig::new(self.learning_rate, epochs, Loss::Mse)
            .with_batch_size(self.batch_size)
            .with_seed(seed)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaeTrainReport {
    pub ae1: Vec<f64>,
    pub ae3: Vec<f64>,
    pub ae2: Vec<f64>,
    /// AE2 reconstruction MSE on the training data before and after fine-tuning.
    pub ae2_initial_mse: f64,
    pub ae2_final_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedSae {
    pub spec: AeSpec,
    pub ae1: Network,
    pub ae3: Network,
    pub ae2: Network,
}

fn ae1_net(spec: &AeSpec, seed: u64) -> Result<Network> {
    let mut rng = seed::rng(seed);
    Network::dense(
        &[spec.input_dim, spec.h1, spec.h1, spec.input_dim],
        &[Activation::Relu, Activation::Relu, Activation::Sigmoid],
        &mut rng,
    )
}

fn ae3_net(spec: &AeSpec, seed: u64) -> Result<Network> {
    let mut rng = seed::rng(seed);
    Network::dense(
        &[spec.h1, spec.h2, spec.h2, spec.h1],
        &[Activation::Relu, Activation::Relu, Activation::Relu],
        &mut rng,
    )
}

/// AE2 layout: AE1 encoder, AE3's three layers, AE1 decoder.
fn assemble(ae1: &Network, ae3: &Network) -> Result<Network> {
    let a = ae1.layers();
    let b = ae3.layers();
    if a.len() != 3 || b.len() != 3 {
        return Err(Error::InvalidConfig("AE1 and AE3 must have three layers each".into()));
    }
    if b[0].in_dim() != a[1].out_dim() {
        return Err(Error::DimensionMismatch {
            expected: a[1].out_dim(),
            got: b[0].in_dim(),
        });
    }
    Network::new(vec![
        a[0].clone(),
        b[0].clone(),
        b[1].clone(),
        b[2].clone(),
        a[2].clone(),
    ])
}

fn encode_ae1(ae1: &Network, x: &[f64]) -> Result<Vec<f64>> {
    let code = Network::new(ae1.layers()[..2].to_vec())?;
    code.forward(x)
}

fn check_data(data: &FingerprintDataset, spec: &AeSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("autoencoder training data"));
    }
    if data.ap_count() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: data.ap_count(),
        });
    }
    Ok(data.features())
}

fn resolve_spec(data: &FingerprintDataset, cfg: &SaeConfig) -> AeSpec {
    cfg.spec.unwrap_or_else(|| AeSpec::halving(data.ap_count()))
}

/// Trains the stacked autoencoder with the configured mode.
pub fn train(data: &FingerprintDataset, cfg: &SaeConfig, seed: u64) -> Result<(StackedSae, SaeTrainReport)> {
    let spec = resolve_spec(data, cfg);
    match cfg.mode {
        SaeMode::Layerwise => train_layerwise(data, spec, cfg, seed),
        SaeMode::EndToEnd => train_end_to_end(data, spec, cfg, seed),
    }
}

pub fn train_layerwise(
    data: &FingerprintDataset,
    spec: AeSpec,
    cfg: &SaeConfig,
    seed: u64,
) -> Result<(StackedSae, SaeTrainReport)> {
    let x = check_data(data, &spec)?;
    let mut report = SaeTrainReport::default();

    let mut ae1 = ae1_net(&spec, seed::derive(seed, &[seed::tag("ae1-init")]))?;
    let r = nn::sgd_train(
        &mut ae1,
        &x,
        Targets::Dense(&x),
        &cfg.phase(cfg.ae1_epochs, seed::derive(seed, &[seed::tag("ae1-sgd")])),
    )?;
    report.ae1 = r.epoch_losses;

    let codes = x.iter().map(|v| encode_ae1(&ae1, v)).collect::<Result<Vec<_>>>()?;
    let mut ae3 = ae3_net(&spec, seed::derive(seed, &[seed::tag("ae3-init")]))?;
    let r = nn::sgd_train(
        &mut ae3,
        &codes,
        Targets::Dense(&codes),
        &cfg.phase(cfg.ae3_epochs, seed::derive(seed, &[seed::tag("ae3-sgd")])),
    )?;
    report.ae3 = r.epoch_losses;

    let mut ae2 = assemble(&ae1, &ae3)?;
    report.ae2_initial_mse = nn::mean_loss(&ae2, &x, Targets::Dense(&x), Loss::Mse)?;
    let mut phase = cfg.phase(cfg.ae2_epochs, seed::derive(seed, &[seed::tag("ae2-sgd")]));
    if cfg.freeze_borrowed {
        phase.frozen_layers = vec![0, 4];
    }
    let r = nn::sgd_train(&mut ae2, &x, Targets::Dense(&x), &phase)?;
    report.ae2 = r.epoch_losses;
    report.ae2_final_mse = nn::mean_loss(&ae2, &x, Targets::Dense(&x), Loss::Mse)?;

    Ok((StackedSae { spec, ae1, ae3, ae2 }, report))
}

/// Conventional training of the same AE2 architecture from random weights,
/// given as many passes over raw data as the layer-wise schedule.
pub fn train_end_to_end(
    data: &FingerprintDataset,
    spec: AeSpec,
    cfg: &SaeConfig,
    seed: u64,
) -> Result<(StackedSae, SaeTrainReport)> {
    let x = check_data(data, &spec)?;
    let ae1 = ae1_net(&spec, seed::derive(seed, &[seed::tag("ae1-init")]))?;
    let ae3 = ae3_net(&spec, seed::derive(seed, &[seed::tag("ae3-init")]))?;
    let mut ae2 = assemble(&ae1, &ae3)?;
    let mut report = SaeTrainReport {
        ae2_initial_mse: nn::mean_loss(&ae2, &x, Targets::Dense(&x), Loss::Mse)?,
        ..Default::default()
    };
    let epochs = cfg.ae1_epochs + cfg.ae2_epochs;
    let r = nn::sgd_train(
        &mut ae2,
        &x,
        Targets::Dense(&x),
        &cfg.phase(epochs, seed::derive(seed, &[seed::tag("ae2-sgd")])),
    )?;
    report.ae2 = r.epoch_losses;
    report.ae2_final_mse = nn::mean_loss(&ae2, &x, Targets::Dense(&x), Loss::Mse)?;
    Ok((StackedSae { spec, ae1, ae3, ae2 }, report))
}

impl StackedSae {
    /// Trainable parameters over all eleven layers of AE1, AE3 and AE2.
    pub fn param_count(&self) -> usize {
        self.ae1.param_count() + self.ae3.param_count() + self.ae2.param_count()
    }

    /// AE2 forward pass clamped to [0, 1].
    pub fn reconstruct(&self, rss: &[f64]) -> Result<Vec<f64>> {
        if rss.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                got: rss.len(),
            });
        }
        let mut out = self.ae2.forward(rss)?;
        for v in &mut out {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(out)
    }

    /// Original samples followed by one reconstruction per original.
    pub fn augment(&self, data: &FingerprintDataset) -> Result<FingerprintDataset> {
        self.augment_n(data, 1)
    }

    /// Original samples followed by `multiplicity` rounds of reconstructions.
    /// Later rounds reconstruct the previous round's output so copies differ.
    pub fn augment_n(&self, data: &FingerprintDataset, multiplicity: usize) -> Result<FingerprintDataset> {
        let mut out = data.clone();
        let mut current: Vec<Vec<f64>> = data.samples().iter().map(|s| s.rss.clone()).collect();
        for _ in 0..multiplicity {
            current = current.iter().map(|x| self.reconstruct(x)).collect::<Result<_>>()?;
            for (src, rss) in data.samples().iter().zip(&current) {
                out.push(Fingerprint {
                    rss: rss.clone(),
                    rp_id: src.rp_id.clone(),
                    device_id: src.device_id.clone(),
                })?;
            }
        }
        Ok(out)
    }

    /// `u32` JSON length, the [`AeSpec`] as JSON, then AE1, AE3 and AE2
    /// weight snapshots.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let spec = serde_json::to_vec(&self.spec)?;
        w.write_all(&(spec.len() as u32).to_le_bytes())?;
        w.write_all(&spec)?;
        for net in [&self.ae1, &self.ae3, &self.ae2] {
            nn::write_snapshot(net, &mut w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut spec = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut spec)?;
        let spec: AeSpec = serde_json::from_slice(&spec)?;
        spec.validate()?;
        let ae1 = nn::read_snapshot(&mut r)?;
        let ae3 = nn::read_snapshot(&mut r)?;
        let ae2 = nn::read_snapshot(&mut r)?;
        if ae2.input_dim() != Some(spec.input_dim) || ae2.layers().len() != 5 {
            return Err(Error::Codec("AE2 snapshot does not match the stored widths".into()));
        }
        Ok(Self { spec, ae1, ae3, ae2 })
    }
}

/// Layer built only for parameter-count checks.
pub fn layer_param_count(in_dim: usize, out_dim: usize) -> usize {
    DenseLayer::glorot(in_dim, out_dim, Activation::Linear, &mut seed::rng(0)).param_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Point3, RpMap};
    use rand::Rng;

    fn dataset(rps: usize, per_rp: usize, dim: usize, seed: u64) -> FingerprintDataset {
        let mut rng = seed::rng(seed);
        let mut map = RpMap::new();
        for r in 0..rps {
            map.insert(format!("rp{r}"), Point3::new(r as f64, 0.0, 0.0)).unwrap();
        }
        let mut ds = FingerprintDataset::new((0..dim).map(|i| format!("ap{i}")), map).unwrap();
        for r in 0..rps {
            let base: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..0.9)).collect();
            for _ in 0..per_rp {
                let rss = base.iter().map(|b| (b + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0)).collect();
                ds.push(Fingerprint {
                    rss,
                    rp_id: format!("rp{r}"),
                    device_id: "dev".into(),
                })
                .unwrap();
            }
        }
        ds
    }

    fn quick(epochs: usize) -> SaeConfig {
        SaeConfig {
            learning_rate: 0.1,
            batch_size: 8,
            ..SaeConfig::default().with_epochs(epochs)
        }
    }

    #[test]
    fn spec_validation() {
        assert!(AeSpec { input_dim: 4, h1: 5, h2: 1 }.validate().is_err());
        assert!(AeSpec { input_dim: 4, h1: 2, h2: 3 }.validate().is_err());
        assert!(AeSpec { input_dim: 4, h1: 2, h2: 0 }.validate().is_err());
        assert_eq!(AeSpec::halving(172), AeSpec { input_dim: 172, h1: 86, h2: 43 });
        assert_eq!(AeSpec::halving(1), AeSpec { input_dim: 1, h1: 1, h2: 1 });
    }

    #[test]
    fn layer_counts() {
        assert_eq!(layer_param_count(172, 86), 14878);
        let ds = dataset(2, 2, 8, 1);
        let (sae, _) = train_layerwise(&ds, AeSpec::halving(8), &quick(0), 1).unwrap();
        let layers = sae.ae1.layers().len() + sae.ae3.layers().len() + sae.ae2.layers().len();
        assert_eq!(layers, 11);
        assert_eq!(sae.ae2.layers().len(), 5);
        let oracle: usize = [(8, 4), (4, 4), (4, 8), (4, 2), (2, 2), (2, 4), (8, 4), (4, 2), (2, 2), (2, 4), (4, 8)]
            .iter()
            .map(|(i, o)| (i + 1) * o)
            .sum();
        assert_eq!(sae.param_count(), oracle);
    }

    #[test]
    fn zero_epochs_give_assembled_initial_weights() {
        let ds = dataset(3, 2, 6, 2);
        let (sae, report) = train_layerwise(&ds, AeSpec::halving(6), &quick(0), 9).unwrap();
        assert!(report.ae1.is_empty() && report.ae3.is_empty() && report.ae2.is_empty());
        let spec = AeSpec::halving(6);
        let a = ae1_net(&spec, seed::derive(9, &[seed::tag("ae1-init")])).unwrap();
        let b = ae3_net(&spec, seed::derive(9, &[seed::tag("ae3-init")])).unwrap();
        assert_eq!(sae.ae2, assemble(&a, &b).unwrap());
        assert_eq!(report.ae2_initial_mse, report.ae2_final_mse);
    }

    #[test]
    fn assembly_rejects_mismatched_widths() {
        let a = ae1_net(&AeSpec { input_dim: 6, h1: 4, h2: 2 }, 1).unwrap();
        let b = ae3_net(&AeSpec { input_dim: 6, h1: 3, h2: 2 }, 1).unwrap();
        assert!(matches!(assemble(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn full_width_learns_duplicates() {
        let mut ds = dataset(1, 0, 5, 3);
        let rss = vec![0.2, 0.4, 0.6, 0.8, 0.5];
        for _ in 0..5 {
            ds.push(Fingerprint {
                rss: rss.clone(),
                rp_id: "rp0".into(),
                device_id: "d".into(),
            })
            .unwrap();
        }
        let cfg = SaeConfig {
            learning_rate: 0.3,
            batch_size: 5,
            ..SaeConfig::default().with_epochs(600)
        };
        let spec = AeSpec { input_dim: 5, h1: 5, h2: 5 };
        let (_, report) = train_layerwise(&ds, spec, &cfg, 3).unwrap();
        assert!(report.ae2_final_mse < 1e-3, "mse {}", report.ae2_final_mse);
    }

    #[test]
    fn fine_tuning_reduces_error() {
        let ds = dataset(5, 4, 12, 4);
        let (_, report) = train_layerwise(&ds, AeSpec::halving(12), &quick(50), 4).unwrap();
        assert_eq!(report.ae1.len(), 50);
        assert!(report.ae2_final_mse < report.ae2_initial_mse);
    }

    #[test]
    fn augment_doubles_and_keeps_labels() {
        let ds = dataset(4, 3, 10, 5);
        let before = ds.clone();
        let (sae, _) = train_layerwise(&ds, AeSpec::halving(10), &quick(5), 5).unwrap();
        let aug = sae.augment(&ds).unwrap();
        assert_eq!(ds, before);
        assert_eq!(aug.len(), 2 * ds.len());
        assert_eq!(&aug.samples()[..ds.len()], ds.samples());
        for (a, b) in aug.samples()[ds.len()..].iter().zip(ds.samples()) {
            assert_eq!(a.rp_id, b.rp_id);
            assert!(a.rss.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(sae.augment_n(&ds, 3).unwrap().len(), 4 * ds.len());
        assert_eq!(sae.augment_n(&ds, 0).unwrap(), ds);
    }

    #[test]
    fn bottleneck_is_lossy() {
        let ds = dataset(6, 1, 16, 6);
        let spec = AeSpec { input_dim: 16, h1: 4, h2: 2 };
        let (sae, _) = train_layerwise(&ds, spec, &quick(20), 6).unwrap();
        let x = &ds.samples()[0].rss;
        let y = sae.reconstruct(x).unwrap();
        assert!(x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > 0.0);
        assert!(sae.reconstruct(&[0.5; 3]).is_err());
    }

    #[test]
    fn end_to_end_mode_trains() {
        let ds = dataset(3, 3, 8, 7);
        let cfg = SaeConfig {
            mode: SaeMode::EndToEnd,
            ..quick(10)
        };
        let (sae, report) = train(&ds, &cfg, 7).unwrap();
        assert_eq!(report.ae2.len(), 20);
        assert_eq!(sae.ae2.layers().len(), 5);
    }

    #[test]
    fn serialization_round_trip() {
        let ds = dataset(2, 2, 6, 8);
        let (sae, _) = train_layerwise(&ds, AeSpec::halving(6), &quick(3), 8).unwrap();
        let mut buf = Vec::new();
        sae.write_to(&mut buf).unwrap();
        assert_eq!(StackedSae::read_from(&buf[..]).unwrap(), sae);
        assert!(StackedSae::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn rejects_bad_data() {
        let ds = dataset(2, 2, 6, 9);
        assert!(train_layerwise(&ds, AeSpec::halving(7), &quick(1), 1).is_err());
        let empty = ds.empty_like();
        assert!(train_layerwise(&empty, AeSpec::halving(6), &quick(1), 1).is_err());
    }
}
