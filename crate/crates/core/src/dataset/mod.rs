//! Fingerprint data model and everything that produces fingerprints:
//! CSV ingestion, synthetic radio maps, and device-heterogeneity transforms.

mod csv;
pub(crate) mod device;
mod radio;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{load_csv, read_csv, save_csv, write_csv};
pub use self::device::{
    apply_device_profile, apply_device_profile_with, build_offline_online_split, capture,
    DeviceProfile, OFFLINE_PER_RP, ONLINE_PER_RP,
};
pub use self::radio::{generate_radio_map, PathLossModel, FloorplanSpec, RadioMap};

/// Raw RSS reading used for an AP that was not heard.
pub const MISSING_DBM: f64 = -100.0;
/// Strongest representable reading.
pub const MAX_DBM: f64 = 0.0;

/// Maps a raw dBm reading linearly from [-100, 0] onto [0, 1], clamping
/// values outside that range.
pub fn normalize_rss(raw_dbm: f64) -> Result<f64> {
    if !raw_dbm.is_finite() {
        return Err(Error::NonFiniteRss(raw_dbm));
    }
    let clamped = raw_dbm.clamp(MISSING_DBM, MAX_DBM);
    Ok((clamped - MISSING_DBM) / (MAX_DBM - MISSING_DBM))
}

/// Inverse of [`normalize_rss`] on [0, 1].
pub fn denormalize_rss(value: f64) -> f64 {
    value.clamp(0.0, 1.0) * (MAX_DBM - MISSING_DBM) + MISSING_DBM
}

pub(crate) fn clamp_dbm(raw: f64) -> f64 {
    raw.clamp(MISSING_DBM, MAX_DBM)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    /// Normalized readings, one per AP column.
    pub rss: Vec<f64>,
    pub rp_id: String,
    pub device_id: String,
}

/// Reference points in insertion order. The position of an RP in the map is
/// its class index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RpMap {
    entries: IndexMap<String, Point3>,
}

impl RpMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rp_id: impl Into<String>, at: Point3) -> Result<usize> {
        let rp_id = rp_id.into();
        if !at.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "reference point `{rp_id}` has non-finite coordinates"
            )));
        }
        if self.entries.contains_key(&rp_id) {
            return Err(Error::InvalidConfig(format!(
                "duplicate reference point `{rp_id}`"
            )));
        }
        let (index, _) = self.entries.insert_full(rp_id, at);
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, rp_id: &str) -> Option<Point3> {
        self.entries.get(rp_id).copied()
    }

    pub fn class_of(&self, rp_id: &str) -> Option<usize> {
        self.entries.get_index_of(rp_id)
    }

    pub fn by_class(&self, class: usize) -> Option<(&str, Point3)> {
        self.entries.get_index(class).map(|(k, v)| (k.as_str(), *v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Point3)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// A set of fingerprints over a fixed AP column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDataset {
    samples: Vec<Fingerprint>,
    ap_index: IndexSet<String>,
    rp_map: RpMap,
}

impl FingerprintDataset {
    pub fn new(ap_ids: impl IntoIterator<Item = String>, rp_map: RpMap) -> Result<Self> {
        let mut ap_index = IndexSet::new();
        for ap in ap_ids {
            if !ap_index.insert(ap.clone()) {
                return Err(Error::InvalidConfig(format!("duplicate AP identifier `{ap}`")));
            }
        }
        Ok(Self {
            samples: Vec::new(),
            ap_index,
            rp_map,
        })
    }

    /// Empty dataset sharing this one's AP layout and RP map.
    pub fn empty_like(&self) -> Self {
        Self {
            samples: Vec::new(),
            ap_index: self.ap_index.clone(),
            rp_map: self.rp_map.clone(),
        }
    }

    pub fn push(&mut self, fp: Fingerprint) -> Result<()> {
        if fp.rss.len() != self.ap_index.len() {
            return Err(Error::DimensionMismatch {
                expected: self.ap_index.len(),
                got: fp.rss.len(),
            });
        }
        if let Some(bad) = fp.rss.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidConfig(format!(
                "normalized RSS {bad} outside [0, 1]"
            )));
        }
        if self.rp_map.get(&fp.rp_id).is_none() {
            return Err(Error::UnknownRp(fp.rp_id));
        }
        self.samples.push(fp);
        Ok(())
    }

    pub fn samples(&self) -> &[Fingerprint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ap_count(&self) -> usize {
        self.ap_index.len()
    }

    pub fn ap_ids(&self) -> impl Iterator<Item = &str> {
        self.ap_index.iter().map(String::as_str)
    }

    pub fn ap_column(&self, ap_id: &str) -> Option<usize> {
        self.ap_index.get_index_of(ap_id)
    }

    pub fn rp_map(&self) -> &RpMap {
        &self.rp_map
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.rss.clone()).collect()
    }

    /// Class index of every sample, in sample order.
    pub fn classes(&self) -> Vec<usize> {
        self.samples
            .iter()
            .map(|s| self.rp_map.class_of(&s.rp_id).expect("push validates rp ids"))
            .collect()
    }
}
