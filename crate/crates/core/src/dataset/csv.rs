//! Fingerprint CSV format:
//!
//! ```text
//! rp_id,x,y,z,device_id,<ap_mac_1>,...,<ap_mac_M>
//! ```
//!
//! RSS cells hold raw dBm readings (`-100` marks a missing AP). Coordinate
//! cells may be left empty on a row whose `rp_id` already appeared with
//! coordinates earlier in the file.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{denormalize_rss, normalize_rss, Fingerprint, FingerprintDataset, Point3, RpMap};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 5] = ["rp_id", "x", "y", "z", "device_id"];

pub fn load_csv(path: impl AsRef<Path>) -> Result<FingerprintDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv(file, &path.display().to_string())
}

/// Parses the fingerprint CSV format from any reader. `source_name` is used
/// in error messages.
pub fn read_csv<R: Read>(reader: R, source_name: &str) -> Result<FingerprintDataset> {
    let err = |line: u64, message: String| Error::Csv {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| err(1, e.to_string()))?,
        None => return Err(err(1, "missing header".into())),
    };
    if header.len() < FIXED_COLUMNS.len()
        || header.iter().zip(FIXED_COLUMNS).any(|(got, want)| got.trim() != want)
    {
        return Err(err(
            1,
            format!("header must start with `{}`", FIXED_COLUMNS.join(",")),
        ));
    }
    let ap_ids: Vec<String> = header
        .iter()
        .skip(FIXED_COLUMNS.len())
        .map(|s| s.trim().to_string())
        .collect();
    if ap_ids.iter().any(String::is_empty) {
        return Err(err(1, "empty AP identifier in header".into()));
    }
    let width = header.len();

    let mut rp_map = RpMap::new();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| err(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != width {
            return Err(err(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let rp_id = rec[0].trim().to_string();
        if rp_id.is_empty() {
            return Err(err(line, "empty rp_id".into()));
        }
        let coords: Vec<&str> = (1..4).map(|i| rec[i].trim()).collect();
        if coords.iter().all(|c| c.is_empty()) {
            if rp_map.get(&rp_id).is_none() {
                return Err(err(
                    line,
                    format!("row without coordinates references unknown rp_id `{rp_id}`"),
                ));
            }
        } else {
            let mut xyz = [0.0; 3];
            for (slot, cell) in xyz.iter_mut().zip(&coords) {
                *slot = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, format!("bad coordinate `{cell}`")))?;
            }
            let at = Point3::new(xyz[0], xyz[1], xyz[2]);
            match rp_map.get(&rp_id) {
                Some(existing) if existing != at => {
                    return Err(err(
                        line,
                        format!("conflicting coordinates for rp_id `{rp_id}`"),
                    ))
                }
                Some(_) => {}
                None => {
                    rp_map.insert(rp_id.clone(), at).map_err(|e| err(line, e.to_string()))?;
                }
            }
        }
        let device_id = rec[4].trim().to_string();
        let mut rss = Vec::with_capacity(ap_ids.len());
        for cell in rec.iter().skip(FIXED_COLUMNS.len()) {
            let raw: f64 = cell
                .trim()
                .parse()
                .map_err(|_| err(line, format!("bad RSS value `{cell}`")))?;
            rss.push(normalize_rss(raw).map_err(|e| err(line, e.to_string()))?);
        }
        rows.push((line, Fingerprint { rss, rp_id, device_id }));
    }

    let mut ds = FingerprintDataset::new(ap_ids, rp_map).map_err(|e| err(1, e.to_string()))?;
    for (line, fp) in rows {
        ds.push(fp).map_err(|e| err(line, e.to_string()))?;
    }
    Ok(ds)
}

pub fn save_csv(ds: &FingerprintDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path)?;
    write_csv(ds, &mut file)?;
    file.flush()?;
    Ok(())
}

/// Writes every row with full coordinates. Readings are written as raw dBm;
/// integral values are written without a fractional part.
pub fn write_csv<W: Write>(ds: &FingerprintDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let header: Vec<&str> = FIXED_COLUMNS.iter().copied().chain(ds.ap_ids()).collect();
    w.write_record(&header).map_err(csv_io)?;
    for fp in ds.samples() {
        let at = ds.rp_map().get(&fp.rp_id).expect("dataset invariant");
        let mut row = vec![
            fp.rp_id.clone(),
            at.x.to_string(),
            at.y.to_string(),
            at.z.to_string(),
            fp.device_id.clone(),
        ];
        row.extend(fp.rss.iter().map(|&v| format_dbm(denormalize_rss(v))));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn format_dbm(raw: f64) -> String {
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        format!("{}", rounded as i64)
    } else {
        raw.to_string()
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<FingerprintDataset> {
        read_csv(text.as_bytes(), "inline")
    }

    #[test]
    fn empty_data_section_keeps_ap_index() {
        let ds = parse("rp_id,x,y,z,device_id,aa:01,aa:02\n").unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.ap_count(), 2);
        assert_eq!(ds.ap_column("aa:02"), Some(1));
    }

    #[test]
    fn all_missing_row_is_all_zeros() {
        let ds = parse("rp_id,x,y,z,device_id,a,b,c\nrp1,1,2,0,moto,-100,-100,-100\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.samples()[0].rss, vec![0.0; 3]);
        assert_eq!(ds.rp_map().get("rp1"), Some(Point3::new(1.0, 2.0, 0.0)));
    }

    #[test]
    fn coordinate_less_rows_reuse_known_rps() {
        let text = "rp_id,x,y,z,device_id,a\nrp1,1,0,0,d,-40\nrp1,,,,d,-50\n";
        let ds = parse(text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples()[1].rss, vec![0.5]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let unknown = parse("rp_id,x,y,z,device_id,a\nrp1,1,0,0,d,-40\nrp2,,,,d,-50\n");
        match unknown {
            Err(Error::Csv { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("rp2"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let arity = parse("rp_id,x,y,z,device_id,a,b\nrp1,1,0,0,d,-40\n");
        assert!(matches!(arity, Err(Error::Csv { line: 2, .. })));
        let header = parse("rp,x,y,z,device_id,a\n");
        assert!(matches!(header, Err(Error::Csv { line: 1, .. })));
        let bad_rss = parse("rp_id,x,y,z,device_id,a\nrp1,1,0,0,d,strong\n");
        assert!(matches!(bad_rss, Err(Error::Csv { line: 2, .. })));
        let conflict = parse("rp_id,x,y,z,device_id,a\nrp1,1,0,0,d,-40\nrp1,2,0,0,d,-40\n");
        assert!(matches!(conflict, Err(Error::Csv { line: 3, .. })));
    }

    #[test]
    fn write_then_read_reproduces_matrix() {
        let text = "rp_id,x,y,z,device_id,a,b\nrp1,1.5,0,0,d,-40,-100\nrp2,2.5,0,0,e,-73,-12\n";
        let ds = parse(text).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "buf").unwrap();
        assert_eq!(back, ds);
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }
}
