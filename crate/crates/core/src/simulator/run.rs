use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Augmentation, ScenarioConfig, UpdateMode};
use crate::dataset::{device, DeviceProfile, FingerprintDataset, RadioMap};
use crate::error::{Error, Result, ResultExt};
use crate::federation::{
    decode_dense, decode_sparse, encode_dense, encode_sparse, fedavg_aggregate, fedhil_aggregate,
    fedhil_aggregate_literal, fedsgd_aggregate, select_top_h, simulated_latency_s, AggregatorKind, ClientUpdate,
    HParam, UpdatePayload,
};
use crate::localizer::{self, SnnConfig};
use crate::nn::{self, Loss, Network, Targets, TrainConfig, WeightVector};
use crate::sae::{self, SaeMode, SaeTrainReport};
use crate::seed::{self, tag};
use crate::dataset::generate_radio_map;

/// Everything that precedes federation for one building: radio map,
/// pretrained global model and the fixed set of noisy RPs.
#[derive(Debug, Clone)]
pub struct PreparedBuilding {
    pub building_id: String,
    pub map: RadioMap,
    pub snn: SnnConfig,
    pub gm: Network,
    pub noisy_rps: Vec<bool>,
    pub offline_losses: Vec<f64>,
    pub sae_report: Option<SaeTrainReport>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub buildings: Vec<PreparedBuilding>,
}

/// Pretraining depends only on these settings, so variants that agree on
/// them can share one [`Prepared`].
pub fn same_pretraining(a: &ScenarioConfig, b: &ScenarioConfig) -> bool {
    a.floorplans == b.floorplans
        && a.training_device == b.training_device
        && a.device(&a.training_device).ok() == b.device(&b.training_device).ok()
        && a.model == b.model
        && a.training.learning_rate == b.training.learning_rate
        && a.training.offline_epochs == b.training.offline_epochs
        && a.training.batch_size == b.training.batch_size
        && a.augmentation == b.augmentation
        && a.sae == b.sae
        && a.noise == b.noise
}

fn offline_set(cfg: &ScenarioConfig, map: &RadioMap, seed: u64) -> Result<FingerprintDataset> {
    let mut offline = FingerprintDataset::new(map.ap_ids.iter().cloned(), map.rp_map())?;
    device::capture_dataset(
        map,
        cfg.device(&cfg.training_device)?,
        device::OFFLINE_PER_RP,
        |_| 0.0,
        &mut seed::derive_rng(seed, &[tag("offline"), tag(&map.building_id)]),
        &mut offline,
    )?;
    Ok(offline)
}

/// The data one seed of a scenario sees in one building.
#[derive(Debug, Clone)]
pub struct BuildingData {
    pub map: RadioMap,
    pub noisy_rps: Vec<bool>,
    /// Training-device captures used for pretraining.
    pub offline: FingerprintDataset,
    /// Every client's evaluation captures, clients in order.
    pub online: FingerprintDataset,
}

/// Regenerates the radio maps and captures of `seed` exactly as the
/// simulator draws them, without training anything.
pub fn generate_datasets(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<BuildingData>> {
    cfg.floorplans
        .iter()
        .map(|f| {
            let id = f.building_id();
            let map = generate_radio_map(&f.resolve()?, seed::derive(seed, &[tag("radio"), tag(id)]))?;
            let noisy_rps = noise_mask(cfg, id, map.rp_count(), seed);
            let offline = offline_set(cfg, &map, seed)?;
            let mut online = FingerprintDataset::new(map.ap_ids.iter().cloned(), map.rp_map())?;
            for (i, (_, profile)) in cfg.expand_clients()?.iter().enumerate() {
                let mut rng = seed::derive_rng(seed, &[tag("eval"), tag(id), i as u64]);
                for fp in online_capture(&map, &noisy_rps, profile, cfg.noise.burst_std_db, &mut rng)?.samples() {
                    online.push(fp.clone())?;
                }
            }
            Ok(BuildingData {
                map,
                noisy_rps,
                offline,
                online,
            })
        })
        .collect()
}

pub fn prepare(cfg: &ScenarioConfig, seed: u64) -> Result<Prepared> {
    let buildings = cfg
        .floorplans
        .iter()
        .map(|f| {
            prepare_building(cfg, f.building_id(), &f.resolve()?, seed)
                .context(|| format!("pretraining {} (seed {seed})", f.building_id()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { seed, buildings })
}

fn prepare_building(
    cfg: &ScenarioConfig,
    building_id: &str,
    spec: &crate::dataset::FloorplanSpec,
    seed: u64,
) -> Result<PreparedBuilding> {
    let b = tag(building_id);
    let map = generate_radio_map(spec, seed::derive(seed, &[tag("radio"), b]))?;
    let offline = offline_set(cfg, &map, seed)?;

    let sae_seed = seed::derive(seed, &[tag("sae"), b]);
    let (train_set, sae_report) = match cfg.augmentation {
        Augmentation::None => (offline, None),
        Augmentation::Custom | Augmentation::Traditional => {
            let mut sae_cfg = cfg.sae.clone();
            sae_cfg.mode = if cfg.augmentation == Augmentation::Custom {
                SaeMode::Layerwise
            } else {
                SaeMode::EndToEnd
            };
            let (model, report) = sae::train(&offline, &sae_cfg, sae_seed)?;
            (model.augment_n(&offline, sae_cfg.multiplicity)?, Some(report))
        }
    };

    let snn = SnnConfig {
        input_dim: map.ap_count(),
        projection: cfg.model.projection,
        hidden: cfg.model.hidden,
        classes: map.rp_count(),
        output: cfg.model.output,
    };
    let mut gm = localizer::build_snn(&snn, seed::derive(seed, &[tag("snn-init"), b]))?;
    let tc = TrainConfig::new(cfg.training.learning_rate, cfg.training.offline_epochs, Loss::SparseCategoricalCrossentropy)
        .with_batch_size(cfg.training.batch_size)
        .with_seed(seed::derive(seed, &[tag("snn-sgd"), b]));
    let report = localizer::train_offline(&mut gm, &train_set, &tc)?;

    let noisy_rps = noise_mask(cfg, building_id, map.rp_count(), seed);

    Ok(PreparedBuilding {
        building_id: building_id.to_owned(),
        map,
        snn,
        gm,
        noisy_rps,
        offline_losses: report.epoch_losses,
        sae_report,
    })
}

fn noise_mask(cfg: &ScenarioConfig, building_id: &str, rp_count: usize, seed: u64) -> Vec<bool> {
    let mut mask = vec![false; rp_count];
    if cfg.noise.applies_to(building_id) {
        let k = (cfg.noise.rp_fraction * rp_count as f64).round() as usize;
        let mut rng = seed::derive_rng(seed, &[tag("noisy-rps"), tag(building_id)]);
        for i in index::sample(&mut rng, rp_count, k.min(rp_count)) {
            mask[i] = true;
        }
    }
    mask
}

/// The RPs of `building_id` that receive burst noise under `seed`.
pub(crate) fn prepare_noise_mask(cfg: &ScenarioConfig, building_id: &str, seed: u64) -> Result<Vec<bool>> {
    let f = cfg
        .floorplans
        .iter()
        .find(|f| f.building_id() == building_id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown building `{building_id}`")))?;
    Ok(noise_mask(cfg, building_id, f.resolve()?.rp_path.len(), seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientRound {
    pub client_id: String,
    pub device_id: String,
    /// Pre-retrain error of the distributed GM at each RP, in RP order.
    pub errors_m: Vec<f64>,
    /// Mean error of the retrained local model on the same captures.
    pub post_retrain_error_m: Option<f64>,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub seed: u64,
    pub building_id: String,
    pub round: usize,
    pub clients: Vec<ClientRound>,
    pub mean_error_m: f64,
    pub bytes: usize,
    pub latency_s: f64,
}

struct Client {
    id: String,
    profile: DeviceProfile,
    index: u64,
    eval: FingerprintDataset,
}

fn online_capture(
    map: &RadioMap,
    noisy: &[bool],
    profile: &DeviceProfile,
    burst_std_db: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<FingerprintDataset> {
    let mut ds = FingerprintDataset::new(map.ap_ids.iter().cloned(), map.rp_map())?;
    device::capture_dataset(
        map,
        profile,
        device::ONLINE_PER_RP,
        |rp| if noisy[rp] { burst_std_db } else { 0.0 },
        rng,
        &mut ds,
    )?;
    Ok(ds)
}

/// The federated rounds of one seed over every building, starting from the
/// prepared global models.
pub fn federate(
    cfg: &ScenarioConfig,
    prepared: &Prepared,
    aggregator: AggregatorKind,
    h: HParam,
) -> Result<Vec<RoundReport>> {
    let mut out = Vec::new();
    for pb in &prepared.buildings {
        let reports = federate_building(cfg, prepared.seed, pb, aggregator, h)
            .context(|| format!("federating {} (seed {})", pb.building_id, prepared.seed))?;
        out.extend(reports);
    }
    Ok(out)
}

fn federate_building(
    cfg: &ScenarioConfig,
    seed: u64,
    pb: &PreparedBuilding,
    aggregator: AggregatorKind,
    h: HParam,
) -> Result<Vec<RoundReport>> {
    let b = tag(&pb.building_id);
    let burst = cfg.noise.burst_std_db;
    let clients = cfg
        .expand_clients()?
        .into_iter()
        .enumerate()
        .map(|(i, (id, profile))| {
            let mut rng = seed::derive_rng(seed, &[tag("eval"), b, i as u64]);
            let eval = online_capture(&pb.map, &pb.noisy_rps, &profile, burst, &mut rng)?;
            Ok(Client {
                id,
                profile,
                index: i as u64,
                eval,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut gm = pb.gm.clone();
    let mut reports = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut rows = Vec::with_capacity(clients.len());
        let mut pending = Vec::with_capacity(clients.len());
        for client in &clients {
            let errors_m = localizer::evaluate(&gm, &client.eval)?;
            let (update, post) = client_update(cfg, seed, b, round, pb, client, &gm, aggregator, h)?;
            let bytes = update.as_ref().map_or(0, |u| u.1);
            rows.push(ClientRound {
                client_id: client.id.clone(),
                device_id: client.profile.device_id.clone(),
                errors_m,
                post_retrain_error_m: post,
                bytes,
            });
            if let Some((u, _)) = update {
                match cfg.mode {
                    UpdateMode::Synchronous => pending.push(u),
                    UpdateMode::Sequential => aggregate(cfg, &mut gm, aggregator, std::slice::from_ref(&u))?,
                }
            }
        }
        if !pending.is_empty() {
            aggregate(cfg, &mut gm, aggregator, &pending)?;
        }
        let bytes: usize = rows.iter().map(|r| r.bytes).sum();
        let all: Vec<f64> = rows.iter().flat_map(|r| r.errors_m.iter().copied()).collect();
        reports.push(RoundReport {
            seed,
            building_id: pb.building_id.clone(),
            round,
            mean_error_m: localizer::mean(&all),
            bytes,
            latency_s: simulated_latency_s(bytes, cfg.bandwidth_bytes_per_s),
            clients: rows,
        });
    }
    Ok(reports)
}

/// Runs one client's local step and returns its decoded update with the
/// number of bytes it sent, plus the retrained model's local error. The
/// server side only ever sees the decoded payload.
#[allow(clippy::too_many_arguments)]
fn client_update(
    cfg: &ScenarioConfig,
    seed: u64,
    b: u64,
    round: usize,
    pb: &PreparedBuilding,
    client: &Client,
    gm: &Network,
    aggregator: AggregatorKind,
    h: HParam,
) -> Result<(Option<(ClientUpdate, usize)>, Option<f64>)> {
    if aggregator == AggregatorKind::None {
        return Ok((None, None));
    }
    let path = [tag("train"), b, client.index, round as u64];
    let local = online_capture(&pb.map, &pb.noisy_rps, &client.profile, cfg.noise.burst_std_db, &mut seed::derive_rng(seed, &path))?;
    let make = |payload| ClientUpdate {
        client_id: client.id.clone(),
        sample_count: local.len(),
        payload,
    };
    if aggregator == AggregatorKind::FedSgd {
        let g = nn::gradient(gm, &local.features(), Targets::Classes(&local.classes()), Loss::SparseCategoricalCrossentropy)?;
        let bytes = encode_dense(&g.values);
        let g = WeightVector::flat(decode_dense(&bytes)?);
        return Ok((Some((make(UpdatePayload::Gradient(g)), bytes.len())), None));
    }

    let tc = TrainConfig::new(cfg.training.online_lr(), cfg.training.online_epochs, Loss::SparseCategoricalCrossentropy)
        .with_batch_size(cfg.training.batch_size)
        .with_seed(seed::derive(seed, &[tag("local-sgd"), b, client.index, round as u64]));
    let lm = localizer::retrain_local(gm, &local, &tc)?;
    let post = localizer::mean(&localizer::evaluate(&lm, &client.eval)?);
    let lm_flat = lm.flatten();
    let (payload, bytes) = match aggregator {
        AggregatorKind::FedAvg => {
            let bytes = encode_dense(&lm_flat.values);
            (UpdatePayload::Weights(WeightVector::flat(decode_dense(&bytes)?)), bytes.len())
        }
        AggregatorKind::FedHil => {
            let sparse = select_top_h(&lm_flat, &gm.flatten(), h)?;
            let bytes = encode_sparse(&sparse)?;
            (UpdatePayload::Sparse(decode_sparse(&bytes)?), bytes.len())
        }
        AggregatorKind::FedSgd | AggregatorKind::None => unreachable!("handled above"),
    };
    Ok((Some((make(payload), bytes)), Some(post)))
}

fn aggregate(cfg: &ScenarioConfig, gm: &mut Network, aggregator: AggregatorKind, updates: &[ClientUpdate]) -> Result<()> {
    let current = gm.flatten();
    let next = match aggregator {
        AggregatorKind::FedAvg => fedavg_aggregate(updates)?,
        AggregatorKind::FedSgd => {
            let grads: Vec<WeightVector> = updates
                .iter()
                .map(|u| match &u.payload {
                    UpdatePayload::Gradient(g) => Ok(g.clone()),
                    _ => Err(Error::InvalidConfig("FedSGD expects gradients".into())),
                })
                .collect::<Result<_>>()?;
            fedsgd_aggregate(&current, &grads, cfg.training.online_lr())?
        }
        AggregatorKind::FedHil => {
            let sparse: Vec<_> = updates
                .iter()
                .map(|u| match &u.payload {
                    UpdatePayload::Sparse(s) => Ok(s.clone()),
                    _ => Err(Error::InvalidConfig("selective aggregation expects sparse updates".into())),
                })
                .collect::<Result<_>>()?;
            if cfg.eq10_literal {
                fedhil_aggregate_literal(&current, &sparse)?
            } else {
                fedhil_aggregate(&current, &sparse)?
            }
        }
        AggregatorKind::None => return Ok(()),
    };
    gm.load_flat(&next.values)
}

/// Runs `variants` over every seed of `base`, pretraining once per seed.
/// All variants must agree with `base` on the pretraining settings.
pub fn run_variants(base: &ScenarioConfig, variants: &[ScenarioConfig]) -> Result<Vec<super::ScenarioResult>> {
    base.validate()?;
    for v in variants {
        v.validate()?;
        if !same_pretraining(base, v) || v.seeds != base.seeds {
            return Err(Error::InvalidConfig(
                "variants must share seeds and pretraining settings with the base scenario".into(),
            ));
        }
    }
    let prepared: Vec<Prepared> = base.seeds.par_iter().map(|&s| prepare(base, s)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..prepared.len()).map(move |s| (v, s)))
        .collect();
    let runs: Vec<Vec<RoundReport>> = jobs
        .par_iter()
        .map(|&(v, s)| federate(&variants[v], &prepared[s], variants[v].aggregator, variants[v].h))
        .collect::<Result<_>>()?;
    let mut runs = runs.into_iter();
    Ok(variants
        .iter()
        .map(|v| {
            let rounds: Vec<RoundReport> = runs.by_ref().take(prepared.len()).flatten().collect();
            super::ScenarioResult::from_rounds(v, rounds)
        })
        .collect())
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<super::ScenarioResult> {
    let mut out = run_variants(cfg, std::slice::from_ref(cfg))?;
    Ok(out.remove(0))
}
