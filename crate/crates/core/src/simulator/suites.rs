use serde::Serialize;

use super::config::{ClientGroup, ScenarioConfig};
use super::presets;
use super::run::run_variants;
use super::ScenarioResult;
use crate::error::{Error, Result};
use crate::federation::{AggregatorKind, HParam};

pub const DEFAULT_H_VALUES: [f64; 10] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HRow {
    pub h: f64,
    pub mean_error_m: f64,
    pub mean_latency_s: f64,
    pub per_seed_error_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HSweep {
    pub seeds: Vec<u64>,
    pub rows: Vec<HRow>,
}

/// Selective aggregation at each H, sharing pretraining across H.
pub fn h_sweep(cfg: &ScenarioConfig, h_values: &[f64]) -> Result<HSweep> {
    if h_values.is_empty() {
        return Err(Error::Empty("H values"));
    }
    let variants = h_values
        .iter()
        .map(|&h| {
            Ok(ScenarioConfig {
                aggregator: AggregatorKind::FedHil,
                h: HParam::new(h)?,
                name: format!("{}-h{h}", cfg.name),
                ..cfg.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let results = run_variants(cfg, &variants)?;
    let rows = h_values
        .iter()
        .zip(&results)
        .map(|(&h, r)| HRow {
            h,
            mean_error_m: r.summary.mean_error_m,
            mean_latency_s: r.summary.mean_latency_s,
            per_seed_error_m: r.summary.per_seed.iter().map(|s| s.mean_error_m).collect(),
        })
        .collect();
    Ok(HSweep {
        seeds: cfg.seeds.clone(),
        rows,
    })
}

pub const COMPARED: [AggregatorKind; 4] = [
    AggregatorKind::FedAvg,
    AggregatorKind::FedSgd,
    AggregatorKind::FedHil,
    AggregatorKind::None,
];

fn with_aggregator(cfg: &ScenarioConfig, kind: AggregatorKind) -> ScenarioConfig {
    ScenarioConfig {
        aggregator: kind,
        name: format!("{}-{}", cfg.name, kind.name()),
        ..cfg.clone()
    }
}

/// FedAvg, FedSGD, selective aggregation at `cfg.h` and the frozen GM, all
/// from the same pretrained models and client captures.
pub fn compare_aggregators(cfg: &ScenarioConfig) -> Result<Vec<ScenarioResult>> {
    let variants: Vec<_> = COMPARED.iter().map(|&k| with_aggregator(cfg, k)).collect();
    run_variants(cfg, &variants)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCase {
    pub label: String,
    pub clients: Vec<ClientGroup>,
    pub client_count: usize,
    pub buildings: Vec<String>,
    pub per_building_error_m: Vec<f64>,
    /// Uplink bytes of one round in each building.
    pub bytes_per_round: Vec<usize>,
    pub mean_error_m: f64,
    #[serde(skip)]
    pub result: ScenarioResult,
}

fn run_cases(cfg: &ScenarioConfig, cases: Vec<(String, Vec<ClientGroup>)>) -> Result<Vec<SuiteCase>> {
    let variants: Vec<_> = cases
        .iter()
        .map(|(label, clients)| ScenarioConfig {
            clients: clients.clone(),
            name: format!("{}-{label}", cfg.name),
            ..cfg.clone()
        })
        .collect();
    let results = run_variants(cfg, &variants)?;
    Ok(cases
        .into_iter()
        .zip(results)
        .map(|((label, clients), result)| {
            let buildings = result.heatmap.buildings.clone();
            let first_seed = cfg.seeds[0];
            let mut per_building_error_m = Vec::with_capacity(buildings.len());
            let mut bytes_per_round = Vec::with_capacity(buildings.len());
            for b in &buildings {
                let rounds: Vec<_> = result.rounds.iter().filter(|r| &r.building_id == b).collect();
                per_building_error_m.push(crate::localizer::mean(
                    &rounds.iter().map(|r| r.mean_error_m).collect::<Vec<_>>(),
                ));
                bytes_per_round.push(
                    rounds
                        .iter()
                        .find(|r| r.seed == first_seed && r.round == 0)
                        .map_or(0, |r| r.bytes),
                );
            }
            SuiteCase {
                label,
                client_count: clients.iter().map(|g| g.count).sum(),
                clients,
                buildings,
                per_building_error_m,
                bytes_per_round,
                mean_error_m: result.summary.mean_error_m,
                result,
            }
        })
        .collect())
}

/// The five device mixes of six clients each.
pub fn skew_suite(cfg: &ScenarioConfig) -> Result<Vec<SuiteCase>> {
    let cases = presets::skew_cases()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (format!("case{}", i + 1), c))
        .collect();
    run_cases(cfg, cases)
}

/// Six unique devices replicated to 6, 12 and 18 clients.
pub fn scalability_suite(cfg: &ScenarioConfig) -> Result<Vec<SuiteCase>> {
    let cases = presets::SCALE_FACTORS
        .iter()
        .map(|&f| (format!("{}-clients", 6 * f), presets::replicated_clients(f)))
        .collect();
    run_cases(cfg, cases)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatorTrace {
    pub aggregator: AggregatorKind,
    /// Per seed: mean error at each RP over rounds and clients.
    pub per_seed: Vec<(u64, Vec<f64>)>,
    pub p95_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseTraces {
    pub building_id: String,
    pub noisy_rps: Vec<Vec<bool>>,
    pub traces: Vec<AggregatorTrace>,
}

/// Per-RP error traces of every aggregator on the first building that
/// receives noise injection.
pub fn noise_susceptibility(cfg: &ScenarioConfig) -> Result<NoiseTraces> {
    let building = cfg
        .floorplans
        .iter()
        .map(|f| f.building_id())
        .find(|b| cfg.noise.applies_to(b))
        .ok_or_else(|| Error::InvalidConfig("no floorplan receives noise injection".into()))?
        .to_owned();
    let results = compare_aggregators(cfg)?;
    let noisy_rps = cfg
        .seeds
        .iter()
        .map(|&s| {
            let prepared = super::run::prepare_noise_mask(cfg, &building, s)?;
            Ok(prepared)
        })
        .collect::<Result<Vec<_>>>()?;
    let traces = results
        .iter()
        .map(|r| {
            let per_seed = r.rp_traces(&building);
            let p95_per_seed = per_seed.iter().map(|(_, t)| quantile(t, 0.95)).collect();
            AggregatorTrace {
                aggregator: r.aggregator,
                per_seed,
                p95_per_seed,
            }
        })
        .collect();
    Ok(NoiseTraces {
        building_id: building,
        noisy_rps,
        traces,
    })
}

/// Linear-interpolation quantile of unsorted `values`, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}
