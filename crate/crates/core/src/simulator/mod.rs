//! Multi-client federated rounds over synthetic buildings, and the
//! experiment suites built on them.
//!
//! Per seed and building: generate the radio map, capture the offline set
//! with the training device, optionally augment it with the stacked
//! autoencoder, pretrain the classifier as the global model (GM), then run
//! the configured rounds. In each round every client scores the GM on its
//! fixed evaluation captures, retrains a local copy on a fresh capture and
//! sends an update; the server aggregates the updates into the next GM.

mod config;
mod output;
pub mod presets;
mod run;
mod suites;

use serde::Serialize;

use crate::federation::AggregatorKind;
use crate::localizer::mean;

pub use self::config::{
    Augmentation, ClientGroup, FloorplanSource, ModelConfig, NoiseInjection, ScenarioConfig, SyntheticFloorplan,
    TrainingConfig, UpdateMode,
};
pub use self::output::{write_heatmap_csv, write_rounds_csv};
pub use self::run::{
    federate, generate_datasets, prepare, run_scenario, BuildingData, run_variants, same_pretraining, ClientRound, Prepared, PreparedBuilding,
    RoundReport,
};
pub use self::suites::{
    compare_aggregators, h_sweep, noise_susceptibility, scalability_suite, skew_suite, AggregatorTrace, HRow,
    HSweep, NoiseTraces, SuiteCase, COMPARED, DEFAULT_H_VALUES, quantile,
};

/// Mean pre-retrain error per device (rows) and building (columns).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub devices: Vec<String>,
    pub buildings: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Mean over rounds and buildings of the round mean error.
    pub mean_error_m: f64,
    pub first_round_error_m: f64,
    pub final_round_error_m: f64,
    /// Uplink bytes per round summed over buildings.
    pub bytes_per_round: f64,
    pub mean_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean_error_m: f64,
    pub final_round_error_m: f64,
    pub total_bytes: usize,
    pub mean_latency_s: f64,
    pub per_seed: Vec<SeedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub aggregator: AggregatorKind,
    pub h: Option<f64>,
    pub client_count: usize,
    #[serde(skip)]
    pub rounds: Vec<RoundReport>,
    pub heatmap: Heatmap,
    pub summary: Summary,
}

impl ScenarioResult {
    pub fn from_rounds(cfg: &ScenarioConfig, rounds: Vec<RoundReport>) -> Self {
        let buildings: Vec<String> = cfg.floorplans.iter().map(|f| f.building_id().to_owned()).collect();
        let mut devices: Vec<String> = Vec::new();
        for g in &cfg.clients {
            if !devices.contains(&g.device) {
                devices.push(g.device.clone());
            }
        }
        let mut sums = vec![vec![(0.0, 0usize); buildings.len()]; devices.len()];
        for r in &rounds {
            let col = buildings.iter().position(|b| *b == r.building_id).expect("known building");
            for c in &r.clients {
                let row = devices.iter().position(|d| *d == c.device_id).expect("known device");
                let cell = &mut sums[row][col];
                cell.0 += c.errors_m.iter().sum::<f64>();
                cell.1 += c.errors_m.len();
            }
        }
        let values = sums
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
                    .collect()
            })
            .collect();

        let last = cfg.rounds - 1;
        let per_seed: Vec<SeedSummary> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let mine: Vec<&RoundReport> = rounds.iter().filter(|r| r.seed == seed).collect();
                let pick = |round: usize| {
                    mean(&mine.iter().filter(|r| r.round == round).map(|r| r.mean_error_m).collect::<Vec<_>>())
                };
                SeedSummary {
                    seed,
                    mean_error_m: mean(&mine.iter().map(|r| r.mean_error_m).collect::<Vec<_>>()),
                    first_round_error_m: pick(0),
                    final_round_error_m: pick(last),
                    bytes_per_round: mine.iter().map(|r| r.bytes as f64).sum::<f64>() / cfg.rounds as f64,
                    mean_latency_s: mean(&mine.iter().map(|r| r.latency_s).collect::<Vec<_>>()),
                }
            })
            .collect();
        let summary = Summary {
            mean_error_m: mean(&per_seed.iter().map(|s| s.mean_error_m).collect::<Vec<_>>()),
            final_round_error_m: mean(&per_seed.iter().map(|s| s.final_round_error_m).collect::<Vec<_>>()),
            total_bytes: rounds.iter().map(|r| r.bytes).sum(),
            mean_latency_s: mean(&rounds.iter().map(|r| r.latency_s).collect::<Vec<_>>()),
            per_seed,
        };
        Self {
            name: cfg.name.clone(),
            aggregator: cfg.aggregator,
            h: (cfg.aggregator == AggregatorKind::FedHil).then(|| cfg.h.percent()),
            client_count: cfg.client_count(),
            rounds,
            heatmap: Heatmap {
                devices,
                buildings,
                values,
            },
            summary,
        }
    }

    /// Mean error of each RP of `building_id` over rounds and clients, one
    /// trace per seed.
    pub fn rp_traces(&self, building_id: &str) -> Vec<(u64, Vec<f64>)> {
        let mut out: Vec<(u64, Vec<f64>, usize)> = Vec::new();
        for r in self.rounds.iter().filter(|r| r.building_id == building_id) {
            let pos = match out.iter().position(|(s, _, _)| *s == r.seed) {
                Some(p) => p,
                None => {
                    let len = r.clients.first().map_or(0, |c| c.errors_m.len());
                    out.push((r.seed, vec![0.0; len], 0));
                    out.len() - 1
                }
            };
            let entry = &mut out[pos];
            for c in &r.clients {
                for (acc, e) in entry.1.iter_mut().zip(&c.errors_m) {
                    *acc += e;
                }
                entry.2 += 1;
            }
        }
        out.into_iter()
            .map(|(s, sums, n)| (s, sums.into_iter().map(|v| v / n.max(1) as f64).collect()))
            .collect()
    }
}
