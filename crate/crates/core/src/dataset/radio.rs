use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{clamp_dbm, Point3};
use crate::error::{Error, Result};
use crate::seed;

/// Log-distance path loss: `P0 - 10 n log10(max(d, d0) / d0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub p0_dbm: f64,
    pub exponent: f64,
    pub d0_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            p0_dbm: -30.0,
            exponent: 3.0,
            d0_m: 1.0,
        }
    }
}

impl PathLossModel {
    pub fn mean_rss(&self, distance_m: f64) -> f64 {
        self.p0_dbm - 10.0 * self.exponent * (distance_m.max(self.d0_m) / self.d0_m).log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorplanSpec {
    pub building_id: String,
    pub ap_count: usize,
    pub ap_positions: Vec<Point3>,
    /// Reference points in walking order, 1 m apart.
    pub rp_path: Vec<Point3>,
    pub shadowing_std_db: f64,
    /// Correlation length of shadowing along the path. Zero draws shadowing
    /// independently per reference point.
    #[serde(default)]
    pub shadowing_decorrelation_m: f64,
    #[serde(default)]
    pub path_loss: PathLossModel,
}

impl FloorplanSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("floorplan `{}`: {m}", self.building_id)));
        if self.ap_count == 0 {
            return bad("ap_count must be at least 1".into());
        }
        if self.ap_positions.len() != self.ap_count {
            return bad(format!(
                "{} AP positions for ap_count {}",
                self.ap_positions.len(),
                self.ap_count
            ));
        }
        if self.ap_positions.iter().chain(&self.rp_path).any(|p| !p.is_finite()) {
            return bad("non-finite coordinates".into());
        }
        for (i, pair) in self.rp_path.windows(2).enumerate() {
            let d = pair[0].distance(&pair[1]);
            if (d - 1.0).abs() > 1e-9 {
                return bad(format!("RPs {i} and {} are {d} m apart, expected 1 m", i + 1));
            }
        }
        if !(self.shadowing_std_db >= 0.0) || !(self.shadowing_decorrelation_m >= 0.0) {
            return bad("shadowing parameters must be non-negative".into());
        }
        let pl = &self.path_loss;
        if !(pl.d0_m > 0.0) || !pl.exponent.is_finite() || !pl.p0_dbm.is_finite() {
            return bad("invalid path-loss model".into());
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let spec: Self = serde_json::from_reader(std::fs::File::open(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Builds an L-shaped corridor of `path_length_m` metres (so
    /// `path_length_m + 1` RPs) with APs scattered over the surrounding area
    /// at ceiling height.
    pub fn synthetic(
        building_id: impl Into<String>,
        ap_count: usize,
        path_length_m: usize,
        shadowing_std_db: f64,
        layout_seed: u64,
    ) -> Self {
        let first_leg = (path_length_m * 3) / 5;
        let mut rp_path = Vec::with_capacity(path_length_m + 1);
        for i in 0..=first_leg {
            rp_path.push(Point3::new(i as f64, 0.0, 0.0));
        }
        for j in 1..=(path_length_m - first_leg) {
            rp_path.push(Point3::new(first_leg as f64, j as f64, 0.0));
        }
        let margin = 10.0;
        let (w, h) = (first_leg as f64, (path_length_m - first_leg) as f64);
        let mut rng = seed::rng(layout_seed);
        let ap_positions = (0..ap_count)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-margin..=w + margin),
                    rng.gen_range(-margin..=h + margin),
                    3.0,
                )
            })
            .collect();
        Self {
            building_id: building_id.into(),
            ap_count,
            ap_positions,
            rp_path,
            shadowing_std_db,
            shadowing_decorrelation_m: 0.0,
            path_loss: PathLossModel::default(),
        }
    }

    pub fn ap_ids(&self) -> Vec<String> {
        let h = seed::tag(&self.building_id).to_le_bytes();
        (0..self.ap_count)
            .map(|i| {
                format!(
                    "02:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
                    h[0],
                    h[1],
                    h[2],
                    (i >> 8) & 0xff,
                    i & 0xff
                )
            })
            .collect()
    }

    pub fn rp_ids(&self) -> Vec<String> {
        (0..self.rp_path.len())
            .map(|i| format!("{}-rp{:03}", self.building_id, i))
            .collect()
    }
}

/// Ground-truth raw RSS for every (RP, AP) pair of one floorplan.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub building_id: String,
    pub ap_ids: Vec<String>,
    pub rp_ids: Vec<String>,
    pub rp_coords: Vec<Point3>,
    rss_dbm: Vec<Vec<f64>>,
}

impl RadioMap {
    pub fn rp_count(&self) -> usize {
        self.rp_ids.len()
    }

    pub fn ap_count(&self) -> usize {
        self.ap_ids.len()
    }

    /// Raw dBm vector observed at reference point `rp`.
    pub fn rss(&self, rp: usize) -> &[f64] {
        &self.rss_dbm[rp]
    }

    pub fn rp_map(&self) -> super::RpMap {
        let mut map = super::RpMap::new();
        for (id, at) in self.rp_ids.iter().zip(&self.rp_coords) {
            map.insert(id.clone(), *at).expect("generated ids are unique");
        }
        map
    }
}

pub fn generate_radio_map(spec: &FloorplanSpec, seed: u64) -> Result<RadioMap> {
    spec.validate()?;
    let shadow = Normal::new(0.0, spec.shadowing_std_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = seed::rng(seed);
    let rho = if spec.shadowing_decorrelation_m > 0.0 {
        (-1.0 / spec.shadowing_decorrelation_m).exp()
    } else {
        0.0
    };
    let innovation = (1.0 - rho * rho).sqrt();

    let mut rss_dbm = vec![vec![0.0; spec.ap_count]; spec.rp_path.len()];
    for (ap, ap_at) in spec.ap_positions.iter().enumerate() {
        let mut s = 0.0;
        for (rp, rp_at) in spec.rp_path.iter().enumerate() {
            let draw = if spec.shadowing_std_db > 0.0 {
                shadow.sample(&mut rng)
            } else {
                0.0
            };
            s = if rp == 0 { draw } else { rho * s + innovation * draw };
            rss_dbm[rp][ap] = clamp_dbm(spec.path_loss.mean_rss(ap_at.distance(rp_at)) + s);
        }
    }
    Ok(RadioMap {
        building_id: spec.building_id.clone(),
        ap_ids: spec.ap_ids(),
        rp_ids: spec.rp_ids(),
        rp_coords: spec.rp_path.clone(),
        rss_dbm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_ap(distance: f64, shadowing: f64) -> FloorplanSpec {
        FloorplanSpec {
            building_id: "t".into(),
            ap_count: 1,
            ap_positions: vec![Point3::new(distance, 0.0, 0.0)],
            rp_path: vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            shadowing_std_db: shadowing,
            shadowing_decorrelation_m: 0.0,
            path_loss: PathLossModel::default(),
        }
    }

    #[test]
    fn reference_distance_gives_p0() {
        let map = generate_radio_map(&single_ap(0.5, 0.0), 1).unwrap();
        assert_eq!(map.rss(0), &[-30.0]);
    }

    #[test]
    fn ten_metres_with_exponent_three() {
        let map = generate_radio_map(&single_ap(10.0, 0.0), 1).unwrap();
        let expected = -30.0 - 10.0 * 3.0 * (10.0f64).log10();
        assert!((map.rss(0)[0] - expected).abs() < 1e-12);
        assert!((map.rss(0)[0] - -60.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_bounded() {
        let spec = FloorplanSpec::synthetic("b", 40, 30, 8.0, 3);
        let a = generate_radio_map(&spec, 11).unwrap();
        let b = generate_radio_map(&spec, 11).unwrap();
        let c = generate_radio_map(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for rp in 0..a.rp_count() {
            assert!(a.rss(rp).iter().all(|v| (-100.0..=0.0).contains(v)));
        }
    }

    #[test]
    fn synthetic_path_has_unit_spacing() {
        let spec = FloorplanSpec::synthetic("b", 78, 60, 4.0, 9);
        assert_eq!(spec.rp_path.len(), 61);
        spec.validate().unwrap();
        let mut broken = spec.clone();
        broken.rp_path[5].x += 0.5;
        assert!(broken.validate().is_err());
        let mut no_aps = spec;
        no_aps.ap_count = 0;
        no_aps.ap_positions.clear();
        assert!(no_aps.validate().is_err());
    }

    #[test]
    fn correlated_shadowing_is_smoother() {
        let mut spec = FloorplanSpec::synthetic("b", 20, 80, 6.0, 1);
        let rough = generate_radio_map(&spec, 5).unwrap();
        spec.shadowing_decorrelation_m = 5.0;
        let smooth = generate_radio_map(&spec, 5).unwrap();
        let step = |m: &RadioMap| -> f64 {
            (1..m.rp_count())
                .map(|rp| {
                    m.rss(rp)
                        .iter()
                        .zip(m.rss(rp - 1))
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
                })
                .sum()
        };
        assert!(step(&smooth) < step(&rough));
    }
}
