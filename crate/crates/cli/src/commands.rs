use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use fedloc_core::dataset::save_csv;
use fedloc_core::federation::HParam;
use fedloc_core::localizer::save_checkpoint;
use fedloc_core::simulator::{self, ScenarioConfig, ScenarioResult, SuiteCase, DEFAULT_H_VALUES};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, Command, RunArgs};
use crate::manifest::Manifest;
use crate::{report, Failure};

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::Config(anyhow!("--jobs: {e}")))?;
    }
    let (name, args, run): (&str, RunArgs, fn(&ScenarioConfig, &mut Outputs) -> anyhow::Result<()>) = match cli.command {
        Command::Report(a) => return report::run(&a),
        Command::GenData(a) => ("gen-data", a, gen_data),
        Command::Pretrain(a) => ("pretrain", a, pretrain),
        Command::Run(a) => ("run", a, run_one),
        Command::SweepH(a) => ("sweep-h", a, sweep_h),
        Command::Compare(a) => ("compare", a, compare),
        Command::Skew(a) => ("skew", a, skew),
        Command::Scale(a) => ("scale", a, scale),
        Command::Noise(a) => ("noise", a, noise),
    };
    let cfg = load_config(&args).map_err(Failure::Config)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut config_json = serde_json::to_vec_pretty(&cfg)?;
    config_json.push(b'\n');
    let mut outputs = Outputs::new(&args.out);
    outputs.bytes("config.json", &config_json)?;
    log::info!("{name}: {} seed(s), output in {}", cfg.seeds.len(), args.out.display());
    run(&cfg, &mut outputs)?;
    Manifest::new(name, &config_json, cfg.seeds.clone(), outputs.names).write(&args.out)?;
    Ok(())
}

fn load_config(args: &RunArgs) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_json_file(&args.config)?;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(a) = args.aggregator {
        cfg.aggregator = a;
    }
    if let Some(h) = args.h {
        cfg.h = HParam::new(h)?;
    }
    if let Some(r) = args.rounds {
        cfg.rounds = r;
    }
    cfg.eq10_literal |= args.eq10_literal;
    cfg.validate()?;
    Ok(cfg)
}

/// Tracks the files a command writes, relative to the output directory.
pub struct Outputs {
    dir: PathBuf,
    names: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_owned(),
            names: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.names.push(name.to_owned());
        Ok(path)
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> anyhow::Result<()> {
        let path = self.path(name)?;
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.bytes(name, &data)
    }

    fn with_writer(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
        let path = self.path(name)?;
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<()> {
        self.with_writer(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for r in rows {
                writeln!(w, "{}", r.join(","))?;
            }
            Ok(())
        })
    }

    fn scenario(&mut self, suffix: &str, r: &ScenarioResult) -> anyhow::Result<()> {
        self.with_writer(&format!("rounds{suffix}.csv"), |w| Ok(simulator::write_rounds_csv(r, w)?))?;
        self.with_writer(&format!("heatmap{suffix}.csv"), |w| Ok(simulator::write_heatmap_csv(&r.heatmap, w)?))
    }
}

fn gen_data(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let data: Vec<_> = cfg
        .seeds
        .par_iter()
        .map(|&s| simulator::generate_datasets(cfg, s))
        .collect::<Result<_, _>>()?;
    for (seed, buildings) in cfg.seeds.iter().zip(data) {
        for b in buildings {
            let dir = format!("data/seed{seed}/{}", b.map.building_id);
            save_csv(&b.offline, out.path(&format!("{dir}/offline.csv"))?)?;
            save_csv(&b.online, out.path(&format!("{dir}/online.csv"))?)?;
            let noisy: Vec<String> = b
                .map
                .rp_ids
                .iter()
                .zip(&b.noisy_rps)
                .filter(|(_, &n)| n)
                .map(|(id, _)| id.clone())
                .collect();
            out.json(&format!("{dir}/noisy_rps.json"), &noisy)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PretrainRecord {
    seed: u64,
    building: String,
    parameters: usize,
    first_epoch_loss: Option<f64>,
    final_epoch_loss: Option<f64>,
    augmenter_initial_mse: Option<f64>,
    augmenter_final_mse: Option<f64>,
}

fn pretrain(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let prepared: Vec<_> = cfg
        .seeds
        .par_iter()
        .map(|&s| simulator::prepare(cfg, s))
        .collect::<Result<_, _>>()?;
    let mut records = Vec::new();
    for p in &prepared {
        for b in &p.buildings {
            let name = format!("models/seed{}/{}.bin", p.seed, b.building_id);
            let path = out.path(&name)?;
            save_checkpoint(&path, &b.gm, &b.snn, &b.map.rp_map())?;
            out.names.push(name.replace(".bin", ".json"));
            records.push(PretrainRecord {
                seed: p.seed,
                building: b.building_id.clone(),
                parameters: b.gm.param_count(),
                first_epoch_loss: b.offline_losses.first().copied(),
                final_epoch_loss: b.offline_losses.last().copied(),
                augmenter_initial_mse: b.sae_report.as_ref().map(|r| r.ae2_initial_mse),
                augmenter_final_mse: b.sae_report.as_ref().map(|r| r.ae2_final_mse),
            });
        }
    }
    out.json("pretrain.json", &records)
}

fn run_one(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let r = simulator::run_scenario(cfg)?;
    out.scenario("", &r)?;
    out.json("summary.json", &r)
}

fn sweep_h(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let sweep = simulator::h_sweep(cfg, &DEFAULT_H_VALUES)?;
    let rows = sweep
        .rows
        .iter()
        .map(|r| vec![r.h.to_string(), r.mean_error_m.to_string(), r.mean_latency_s.to_string()])
        .collect();
    out.table("h_sweep.csv", &["h", "mean_error_m", "mean_latency_s"], rows)?;
    out.json("h_sweep.json", &sweep)
}

fn compare(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let results = simulator::compare_aggregators(cfg)?;
    for r in &results {
        out.scenario(&format!("_{}", r.aggregator.name()), r)?;
    }
    out.json("compare.json", &results)
}

fn suite(name: &str, cases: &[SuiteCase], out: &mut Outputs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for c in cases {
        for ((b, e), bytes) in c.buildings.iter().zip(&c.per_building_error_m).zip(&c.bytes_per_round) {
            rows.push(vec![
                c.label.clone(),
                c.client_count.to_string(),
                b.clone(),
                e.to_string(),
                bytes.to_string(),
            ]);
        }
    }
    out.table(
        &format!("{name}.csv"),
        &["case", "clients", "building", "mean_error_m", "bytes_per_round"],
        rows,
    )?;
    out.json(&format!("{name}.json"), &cases)
}

fn skew(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    suite("skew", &simulator::skew_suite(cfg)?, out)
}

fn scale(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    suite("scale", &simulator::scalability_suite(cfg)?, out)
}

fn noise(cfg: &ScenarioConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let t = simulator::noise_susceptibility(cfg)?;
    let mut rows = Vec::new();
    for tr in &t.traces {
        for ((seed, trace), mask) in tr.per_seed.iter().zip(&t.noisy_rps) {
            for (rp, (e, noisy)) in trace.iter().zip(mask).enumerate() {
                rows.push(vec![
                    tr.aggregator.name().to_owned(),
                    seed.to_string(),
                    rp.to_string(),
                    noisy.to_string(),
                    e.to_string(),
                ]);
            }
        }
    }
    out.table("noise_traces.csv", &["aggregator", "seed", "rp", "noisy", "error_m"], rows)?;
    out.json("noise.json", &t)
}
