use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{clamp_dbm, normalize_rss, Fingerprint, FingerprintDataset, RadioMap, MISSING_DBM};
use crate::error::{Error, Result};
use crate::seed;

/// Affine dB distortion plus per-reading jitter and AP dropout, standing in
/// for one phone model's radio chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub gain: f64,
    pub offset_db: f64,
    pub jitter_std_db: f64,
    pub ap_dropout_prob: f64,
}

impl DeviceProfile {
    pub fn identity(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            gain: 1.0,
            offset_db: 0.0,
            jitter_std_db: 0.0,
            ap_dropout_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gain.is_finite()
            && self.offset_db.is_finite()
            && self.jitter_std_db.is_finite()
            && self.jitter_std_db >= 0.0
            && (0.0..=1.0).contains(&self.ap_dropout_prob);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "device profile `{}` out of range",
                self.device_id
            )))
        }
    }
}

pub fn apply_device_profile(fp_raw_dbm: &[f64], profile: &DeviceProfile, seed: u64) -> Result<Vec<f64>> {
    apply_device_profile_with(fp_raw_dbm, profile, &mut seed::rng(seed))
}

/// Per AP: drop to `-100` with the profile's dropout probability, otherwise
/// `gain * reading + offset + N(0, jitter)`, clamped to [-100, 0]. Readings
/// that are already missing stay missing.
pub fn apply_device_profile_with<R: Rng + ?Sized>(
    fp_raw_dbm: &[f64],
    profile: &DeviceProfile,
    rng: &mut R,
) -> Result<Vec<f64>> {
    profile.validate()?;
    let jitter = Normal::new(0.0, profile.jitter_std_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(fp_raw_dbm
        .iter()
        .map(|&reading| {
            let dropped = rng.gen::<f64>() < profile.ap_dropout_prob;
            if dropped || reading <= MISSING_DBM {
                return MISSING_DBM;
            }
            let mut out = profile.gain * reading + profile.offset_db;
            if profile.jitter_std_db > 0.0 {
                out += jitter.sample(rng);
            }
            clamp_dbm(out)
        })
        .collect())
}

/// One scan at a reference point: optional environmental burst noise on top
/// of the ground truth, then the device transform, then rounding to whole
/// dBm as phones report them. Returns raw dBm.
pub fn capture<R: Rng + ?Sized>(
    truth_dbm: &[f64],
    profile: &DeviceProfile,
    burst_std_db: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let disturbed: Vec<f64> = if burst_std_db > 0.0 {
        let burst = Normal::new(0.0, burst_std_db).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        truth_dbm
            .iter()
            .map(|&v| {
                let noise = burst.sample(rng);
                if v <= MISSING_DBM {
                    v
                } else {
                    clamp_dbm(v + noise)
                }
            })
            .collect()
    } else {
        truth_dbm.to_vec()
    };
    let mut out = apply_device_profile_with(&disturbed, profile, rng)?;
    for v in &mut out {
        *v = v.round();
    }
    Ok(out)
}

pub(crate) fn capture_dataset<R: Rng + ?Sized>(
    map: &RadioMap,
    profile: &DeviceProfile,
    per_rp: usize,
    burst_std_db: impl Fn(usize) -> f64,
    rng: &mut R,
    into: &mut FingerprintDataset,
) -> Result<()> {
    for rp in 0..map.rp_count() {
        for _ in 0..per_rp {
            let raw = capture(map.rss(rp), profile, burst_std_db(rp), rng)?;
            let rss = raw.into_iter().map(normalize_rss).collect::<Result<Vec<_>>>()?;
            into.push(Fingerprint {
                rss,
                rp_id: map.rp_ids[rp].clone(),
                device_id: profile.device_id.clone(),
            })?;
        }
    }
    Ok(())
}

pub const OFFLINE_PER_RP: usize = 5;
pub const ONLINE_PER_RP: usize = 1;

/// Offline set: five captures per RP with the training device. Online set:
/// one capture per RP for each testing device.
pub fn build_offline_online_split(
    map: &RadioMap,
    training: &DeviceProfile,
    testing: &[DeviceProfile],
    seed: u64,
) -> Result<(FingerprintDataset, FingerprintDataset)> {
    if map.rp_count() == 0 {
        return Err(Error::Empty("reference-point path"));
    }
    if testing.is_empty() {
        return Err(Error::Empty("testing device profiles"));
    }
    let empty = FingerprintDataset::new(map.ap_ids.iter().cloned(), map.rp_map())?;
    let mut offline = empty.clone();
    let mut online = empty;
    let mut rng = seed::derive_rng(seed, &[seed::tag("offline")]);
    capture_dataset(map, training, OFFLINE_PER_RP, |_| 0.0, &mut rng, &mut offline)?;
    for (i, profile) in testing.iter().enumerate() {
        let mut rng = seed::derive_rng(seed, &[seed::tag("online"), i as u64]);
        capture_dataset(map, profile, ONLINE_PER_RP, |_| 0.0, &mut rng, &mut online)?;
    }
    Ok((offline, online))
}
