use std::path::Path;

use serde::{Deserialize, Serialize};

use super::presets;
use crate::dataset::{DeviceProfile, FloorplanSpec};
use crate::error::{Error, Result};
use crate::federation::{AggregatorKind, HParam};
use crate::nn::Activation;
use crate::sae::SaeConfig;

/// A floorplan given verbatim or generated from a compact description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FloorplanSource {
    Synthetic { synthetic: SyntheticFloorplan },
    Explicit(FloorplanSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFloorplan {
    pub building_id: String,
    pub ap_count: usize,
    pub path_length_m: usize,
    pub shadowing_std_db: f64,
    #[serde(default)]
    pub shadowing_decorrelation_m: f64,
    #[serde(default)]
    pub layout_seed: u64,
}

impl FloorplanSource {
    pub fn building_id(&self) -> &str {
        match self {
            FloorplanSource::Synthetic { synthetic } => &synthetic.building_id,
            FloorplanSource::Explicit(spec) => &spec.building_id,
        }
    }

    pub fn resolve(&self) -> Result<FloorplanSpec> {
        let spec = match self {
            FloorplanSource::Synthetic { synthetic: s } => {
                if s.path_length_m == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "floorplan `{}`: path length must be at least 1 m",
                        s.building_id
                    )));
                }
                let mut spec = FloorplanSpec::synthetic(
                    s.building_id.clone(),
                    s.ap_count,
                    s.path_length_m,
                    s.shadowing_std_db,
                    s.layout_seed,
                );
                spec.shadowing_decorrelation_m = s.shadowing_decorrelation_m;
                spec
            }
            FloorplanSource::Explicit(spec) => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientGroup {
    pub device: String,
    #[serde(default = "one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

impl ClientGroup {
    pub fn new(device: impl Into<String>, count: usize) -> Self {
        Self {
            device: device.into(),
            count,
        }
    }
}

/// Gaussian bursts added to online captures at a fixed random subset of RPs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseInjection {
    pub burst_std_db: f64,
    pub rp_fraction: f64,
    /// Buildings the noise applies to; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub floorplans: Vec<String>,
}

impl NoiseInjection {
    pub fn applies_to(&self, building_id: &str) -> bool {
        self.burst_std_db > 0.0
            && self.rp_fraction > 0.0
            && (self.floorplans.is_empty() || self.floorplans.iter().any(|b| b == building_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// All clients train against the same GM; one aggregation per round.
    #[default]
    Synchronous,
    /// The GM is updated after each client in turn.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    None,
    /// End-to-end trained autoencoder.
    Traditional,
    /// Layer-wise stacked autoencoder.
    #[default]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub projection: usize,
    pub hidden: usize,
    pub output: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            projection: 128,
            hidden: 256,
            output: Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub offline_epochs: usize,
    pub online_epochs: usize,
    /// Defaults to `learning_rate`.
    #[serde(default)]
    pub online_learning_rate: Option<f64>,
    pub batch_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            offline_epochs: 1200,
            online_epochs: 10,
            online_learning_rate: None,
            batch_size: 32,
        }
    }
}

impl TrainingConfig {
    pub fn online_lr(&self) -> f64 {
        self.online_learning_rate.unwrap_or(self.learning_rate)
    }
}

fn default_training_device() -> String {
    "MOTO".into()
}

fn default_h() -> HParam {
    HParam::new(20.0).expect("20 is in range")
}

fn default_rounds() -> usize {
    10
}

fn default_bandwidth() -> f64 {
    1.0e6
}

fn default_aggregator() -> AggregatorKind {
    AggregatorKind::FedHil
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub floorplans: Vec<FloorplanSource>,
    /// Device catalog; clients and the training device refer to it by id.
    #[serde(default = "presets::device_catalog")]
    pub devices: Vec<DeviceProfile>,
    #[serde(default = "default_training_device")]
    pub training_device: String,
    pub clients: Vec<ClientGroup>,
    #[serde(default = "default_aggregator")]
    pub aggregator: AggregatorKind,
    #[serde(default = "default_h")]
    pub h: HParam,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub noise: NoiseInjection,
    pub seeds: Vec<u64>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_bytes_per_s: f64,
    #[serde(default)]
    pub mode: UpdateMode,
    /// Use the literal additive aggregation formula instead of the
    /// per-index mean.
    #[serde(default)]
    pub eq10_literal: bool,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub augmentation: Augmentation,
    #[serde(default)]
    pub sae: SaeConfig,
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn device(&self, id: &str) -> Result<&DeviceProfile> {
        self.devices
            .iter()
            .find(|d| d.device_id == id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown device `{id}`")))
    }

    pub fn client_count(&self) -> usize {
        self.clients.iter().map(|g| g.count).sum()
    }

    /// Client list in order, `(client_id, device profile)`.
    pub fn expand_clients(&self) -> Result<Vec<(String, DeviceProfile)>> {
        let mut out = Vec::with_capacity(self.client_count());
        for group in &self.clients {
            let profile = self.device(&group.device)?;
            for _ in 0..group.count {
                out.push((format!("c{:02}-{}", out.len(), group.device), profile.clone()));
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.floorplans.is_empty() {
            return bad("at least one floorplan is required");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.client_count() == 0 {
            return bad("at least one client is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.bandwidth_bytes_per_s > 0.0 && self.bandwidth_bytes_per_s.is_finite()) {
            return bad("bandwidth must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise.rp_fraction) || !(self.noise.burst_std_db >= 0.0) {
            return bad("noise fraction must be in [0, 1] and burst std non-negative");
        }
        if self.training.batch_size == 0 || !(self.training.learning_rate > 0.0) || !(self.training.online_lr() > 0.0) {
            return bad("training needs a positive learning rate and batch size");
        }
        if self.model.projection == 0 || self.model.hidden == 0 {
            return bad("model widths must be at least 1");
        }
        if !matches!(self.model.output, Activation::Sigmoid | Activation::Softmax) {
            return bad("model output must be sigmoid or softmax");
        }
        let mut ids: Vec<&str> = self.floorplans.iter().map(|f| f.building_id()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("building ids must be unique");
        }
        for d in &self.devices {
            d.validate()?;
        }
        self.device(&self.training_device)?;
        for g in &self.clients {
            self.device(&g.device)?;
        }
        for f in &self.floorplans {
            f.resolve()?;
        }
        if let Some(spec) = self.sae.spec {
            spec.validate()?;
        }
        Ok(())
    }
}
