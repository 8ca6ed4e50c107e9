//! Plot-ready tables derived from the CSV files of a results directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fedloc_core::simulator::quantile;
use serde::Deserialize;

use crate::args::ReportArgs;
use crate::manifest::Manifest;
use crate::Failure;

#[derive(Deserialize)]
struct RoundRow {
    error_m: f64,
}

#[derive(Deserialize)]
struct SweepRow {
    h: f64,
    mean_error_m: f64,
    mean_latency_s: f64,
}

#[derive(Deserialize)]
struct SuiteRow {
    case: String,
    clients: usize,
    building: String,
    mean_error_m: f64,
    bytes_per_round: usize,
}

#[derive(Deserialize)]
struct TraceRow {
    aggregator: String,
    rp: usize,
    noisy: bool,
    error_m: f64,
}

pub fn run(args: &ReportArgs) -> Result<(), Failure> {
    let manifest = Manifest::read(&args.results).map_err(Failure::Config)?;
    let out = args.out.clone().unwrap_or_else(|| args.results.join("report"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let mut boxes = Vec::new();
    for name in &manifest.outputs {
        let src = args.results.join(name);
        match name.as_str() {
            "h_sweep.csv" => {
                let rows: Vec<SweepRow> = read(&src)?;
                let err = rows.iter().map(|r| vec![r.h.to_string(), r.mean_error_m.to_string()]).collect();
                let lat = rows.iter().map(|r| vec![r.h.to_string(), r.mean_latency_s.to_string()]).collect();
                written.push(write(&out, "h_vs_error.csv", &["h", "mean_error_m"], err)?);
                written.push(write(&out, "h_vs_latency.csv", &["h", "mean_latency_s"], lat)?);
            }
            "skew.csv" | "scale.csv" => {
                let rows: Vec<SuiteRow> = read(&src)?;
                let bars = rows
                    .into_iter()
                    .map(|r| {
                        vec![r.case, r.clients.to_string(), r.building, r.mean_error_m.to_string(), r.bytes_per_round.to_string()]
                    })
                    .collect();
                let target = name.replace(".csv", "_bars.csv");
                written.push(write(&out, &target, &["case", "clients", "building", "mean_error_m", "bytes_per_round"], bars)?);
            }
            "noise_traces.csv" => written.push(rp_traces(&src, &out)?),
            n if n.starts_with("rounds") && n.ends_with(".csv") => {
                let label = label(n, "rounds");
                let errs: Vec<f64> = read::<RoundRow>(&src)?.into_iter().map(|r| r.error_m).collect();
                boxes.push((label, errs));
            }
            n if n.starts_with("heatmap") && n.ends_with(".csv") => {
                let target = format!("heatmap_matrix_{}.csv", label(n, "heatmap"));
                std::fs::copy(&src, out.join(&target)).with_context(|| format!("copying {}", src.display()))?;
                written.push(target);
            }
            _ => {}
        }
    }
    if !boxes.is_empty() {
        let rows = boxes
            .into_iter()
            .map(|(label, errs)| {
                let mut row = vec![label, errs.len().to_string()];
                row.extend([0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&q| quantile(&errs, q).to_string()));
                row
            })
            .collect();
        written.push(write(&out, "boxplot.csv", &["series", "n", "min", "q1", "median", "q3", "max"], rows)?);
    }
    if written.is_empty() {
        log::warn!("{} has no outputs a report can use", args.results.display());
    }
    Ok(())
}

/// `rounds_fedavg.csv` -> `fedavg`; `rounds.csv` -> `run`.
fn label(name: &str, prefix: &str) -> String {
    let stem = name.trim_end_matches(".csv").trim_start_matches(prefix).trim_start_matches('_');
    if stem.is_empty() { "run".into() } else { stem.into() }
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn write(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<String> {
    let path: PathBuf = dir.join(name);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(name.to_owned())
}

/// Mean error per RP over seeds, one column per aggregator.
fn rp_traces(src: &Path, out: &Path) -> anyhow::Result<String> {
    let rows: Vec<TraceRow> = read(src)?;
    let mut aggregators: Vec<String> = Vec::new();
    let mut noisy: BTreeMap<usize, bool> = BTreeMap::new();
    let mut sums: BTreeMap<(usize, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        if !aggregators.contains(&r.aggregator) {
            aggregators.push(r.aggregator.clone());
        }
        *noisy.entry(r.rp).or_default() |= r.noisy;
        let e = sums.entry((r.rp, r.aggregator)).or_default();
        e.0 += r.error_m;
        e.1 += 1;
    }
    let mut header = vec!["rp", "noisy"];
    header.extend(aggregators.iter().map(String::as_str));
    let table = noisy
        .iter()
        .map(|(&rp, &n)| {
            let mut row = vec![rp.to_string(), n.to_string()];
            for a in &aggregators {
                let (s, c) = sums.get(&(rp, a.clone())).copied().unwrap_or((f64::NAN, 1));
                row.push((s / c as f64).to_string());
            }
            row
        })
        .collect();
    write(out, "rp_traces.csv", &header, table)
}
