//! Built-in device catalog, buildings and client mixes.

use super::config::{ClientGroup, FloorplanSource, SyntheticFloorplan};
use crate::dataset::DeviceProfile;

fn profile(id: &str, gain: f64, offset_db: f64, jitter_std_db: f64, ap_dropout_prob: f64) -> DeviceProfile {
    DeviceProfile {
        device_id: id.into(),
        gain,
        offset_db,
        jitter_std_db,
        ap_dropout_prob,
    }
}

/// Six phone models. MOTO is the training device.
pub fn device_catalog() -> Vec<DeviceProfile> {
    vec![
        profile("MOTO", 1.0, 0.0, 1.0, 0.0),
        profile("BLU", 0.95, 8.0, 2.0, 0.02),
        profile("HTC", 1.05, -8.0, 2.0, 0.02),
        profile("LG", 0.9, 15.0, 3.0, 0.03),
        profile("OP3", 1.1, -15.0, 3.0, 0.04),
        profile("S7", 1.0, -20.0, 4.0, 0.05),
    ]
}

pub const SIX_DEVICES: [&str; 6] = ["BLU", "HTC", "LG", "MOTO", "OP3", "S7"];

/// One client per phone model.
pub fn six_unique_clients() -> Vec<ClientGroup> {
    SIX_DEVICES.iter().map(|d| ClientGroup::new(*d, 1)).collect()
}

/// The five device mixes, six clients each, from most to least skewed.
pub fn skew_cases() -> Vec<Vec<ClientGroup>> {
    let c = ClientGroup::new;
    vec![
        vec![c("BLU", 5), c("S7", 1)],
        vec![c("BLU", 4), c("OP3", 1), c("S7", 1)],
        vec![c("BLU", 3), c("MOTO", 1), c("OP3", 1), c("S7", 1)],
        vec![c("BLU", 2), c("LG", 1), c("MOTO", 1), c("OP3", 1), c("S7", 1)],
        vec![c("BLU", 1), c("MOTO", 1), c("LG", 1), c("OP3", 1), c("S7", 1), c("HTC", 1)],
    ]
}

/// Six unique devices replicated `factor` times.
pub fn replicated_clients(factor: usize) -> Vec<ClientGroup> {
    SIX_DEVICES.iter().map(|d| ClientGroup::new(*d, factor)).collect()
}

pub const SCALE_FACTORS: [usize; 3] = [1, 2, 3];

/// Five buildings with rising shadowing; the last two are the noisy ones.
pub fn five_buildings() -> Vec<FloorplanSource> {
    let specs = [
        ("building1", 78, 60, 2.0),
        ("building2", 218, 64, 3.0),
        ("building3", 112, 70, 4.0),
        ("building4", 156, 80, 6.0),
        ("building5", 125, 88, 8.0),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(i, &(id, aps, len, shadow))| FloorplanSource::Synthetic {
            synthetic: SyntheticFloorplan {
                building_id: id.into(),
                ap_count: aps,
                path_length_m: len,
                shadowing_std_db: shadow,
                shadowing_decorrelation_m: 3.0,
                layout_seed: 1000 + i as u64,
            },
        })
        .collect()
}
