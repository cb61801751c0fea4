//! Feature table CSV: `patient_id,task,condition,<feature...>`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::RecordingRef;

use super::FeatureVector;

const KEY_COLUMNS: [&str; 3] = ["patient_id", "task", "condition"];

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_feature_csv(file)
}

/// Parses a feature table. Cells reading `NaN`/`inf` (or empty) become 0 and are flagged invalid.
pub fn parse_feature_csv(reader: impl Read) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?,
        None => return Err(Error::Schema("empty feature CSV".into())),
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    for (i, key) in KEY_COLUMNS.iter().enumerate() {
        if header.get(i).map(|h| h.to_ascii_lowercase()) != Some(key.to_string()) {
            return Err(Error::Schema(format!(
                "column {} must be {key:?}, header is {header:?}",
                i + 1
            )));
        }
    }
    let names: Vec<String> = header[3..].to_vec();
    let mut out = Vec::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} cells, found {}", header.len(), rec.len()),
            });
        }
        let recording = RecordingRef {
            patient_id: rec[0].trim().to_string(),
            task: rec[1].parse().map_err(|e: Error| Error::Parse { row, msg: e.to_string() })?,
            condition: rec[2].parse().map_err(|e: Error| Error::Parse { row, msg: e.to_string() })?,
        };
        let mut values = Vec::with_capacity(names.len());
        let mut valid = Vec::with_capacity(names.len());
        for (col, cell) in rec.iter().skip(3).enumerate() {
            let cell = cell.trim();
            let v: f64 = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse().map_err(|_| Error::Parse {
                    row,
                    msg: format!("non-numeric value {cell:?} in column {}", names[col]),
                })?
            };
            valid.push(v.is_finite());
            values.push(if v.is_finite() { v } else { 0.0 });
        }
        out.push(FeatureVector::with_validity(names.clone(), values, valid)?.with_recording(recording));
    }
    Ok(out)
}

/// Reads several feature files that must share one header.
pub fn ingest_feature_csvs<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<FeatureVector>> {
    let mut all: Vec<FeatureVector> = Vec::new();
    let mut first_names: Option<Vec<String>> = None;
    for p in paths {
        let vectors = read_feature_csv(p)?;
        if let Some(v) = vectors.first() {
            match &first_names {
                None => first_names = Some(v.names().to_vec()),
                Some(names) if names.as_slice() != v.names() => {
                    return Err(Error::Schema(format!(
                        "{} has a different feature header",
                        p.as_ref().display()
                    )))
                }
                _ => {}
            }
        }
        all.extend(vectors);
    }
    Ok(all)
}

/// Writes vectors that all share names and carry a recording reference.
/// Invalid values are written as `NaN` so a reread restores their flags.
pub fn write_feature_csv(mut out: impl Write, vectors: &[FeatureVector]) -> Result<()> {
    let names = match vectors.first() {
        Some(v) => v.names(),
        None => return Err(Error::InsufficientData("no feature vectors to write".into())),
    };
    let mut line = KEY_COLUMNS.join(",");
    for n in names {
        line.push(',');
        line.push_str(n);
    }
    line.push('\n');
    let mut buf = line;
    for v in vectors {
        if v.names() != names {
            return Err(Error::Schema("feature vectors disagree on names".into()));
        }
        let r = v
            .recording()
            .ok_or_else(|| Error::Schema("feature vector without recording reference".into()))?;
        buf.push_str(&format!("{},{},{}", r.patient_id, r.task, r.condition));
        for (x, ok) in v.values().iter().zip(v.valid()) {
            if *ok {
                buf.push_str(&format!(",{x}"));
            } else {
                buf.push_str(",NaN");
            }
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<feature csv>", e))
}

pub fn save_feature_csv(path: impl AsRef<Path>, vectors: &[FeatureVector]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_feature_csv(std::io::BufWriter::new(file), vectors)
}
