use std::io::Write;

use super::{Heatmap, ScenarioResult};
use crate::error::Result;

/// Long format, one row per (seed, building, round, client, RP).
pub fn write_rounds_csv<W: Write>(result: &ScenarioResult, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["seed", "building", "round", "client", "device", "rp", "error_m", "bytes"])?;
    for r in &result.rounds {
        for c in &r.clients {
            for (rp, e) in c.errors_m.iter().enumerate() {
                out.write_record([
                    r.seed.to_string(),
                    r.building_id.clone(),
                    r.round.to_string(),
                    c.client_id.clone(),
                    c.device_id.clone(),
                    rp.to_string(),
                    e.to_string(),
                    c.bytes.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Devices as rows, buildings as columns.
pub fn write_heatmap_csv<W: Write>(heatmap: &Heatmap, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec!["device".to_owned()];
    header.extend(heatmap.buildings.iter().cloned());
    out.write_record(&header)?;
    for (device, row) in heatmap.devices.iter().zip(&heatmap.values) {
        let mut rec = vec![device.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
