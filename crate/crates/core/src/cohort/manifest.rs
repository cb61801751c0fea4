use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::types::{Condition, RecordingRef, Sex, Task};

use super::{Cohort, PatientRecord, TaskRecordings};

const HEADER: [&str; 5] = ["patient_id", "sex", "task", "condition", "source"];

/// One manifest row: `patient_id,sex,task,condition,source`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub sex: Sex,
    pub task: Task,
    pub condition: Condition,
    /// WAV path (relative to the manifest) or a feature-table reference.
    pub source: String,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Cohort<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file)
}

/// Parses a manifest into a cohort whose recordings are the source strings.
/// Tokens are case-insensitive; patients missing a condition are kept.
pub fn parse_manifest(reader: impl Read) -> Result<Cohort<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if header != HEADER {
        return Err(Error::Schema(format!("manifest header must be {HEADER:?}, got {header:?}")));
    }
    let mut patients: BTreeMap<String, PatientRecord<String>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse { row, msg: "empty patient_id".into() });
        }
        let sex: Sex = rec[1].parse()?;
        let task: Task = rec[2].parse()?;
        let condition: Condition = rec[3].parse()?;
        let patient = patients.entry(id.clone()).or_insert_with(|| PatientRecord {
            patient_id: id.clone(),
            sex,
            tasks: BTreeMap::new(),
        });
        if patient.sex != sex {
            return Err(Error::Schema(format!("row {row}: patient {id} listed with two sexes")));
        }
        let slot = patient.tasks.entry(task).or_default().slot(condition);
        if slot.is_some() {
            return Err(Error::Duplicate(format!("row {row}: {id}/{task}/{condition}")));
        }
        *slot = Some(rec[4].to_string());
    }
    let cohort = Cohort::new(patients.into_values().collect())?;
    for task in cohort.tasks() {
        let n = cohort.incomplete(task).len();
        if n > 0 {
            log::info!("task {task}: {n} patients lack one condition and are excluded from pair-wise use");
        }
    }
    Ok(cohort)
}

pub fn write_manifest(mut out: impl Write, entries: &[ManifestEntry]) -> Result<()> {
    let mut buf = HEADER.join(",");
    buf.push('\n');
    for e in entries {
        buf.push_str(&format!(
            "{},{},{},{},{}\n",
            e.patient_id, e.sex, e.task, e.condition, e.source
        ));
    }
    out.write_all(buf.as_bytes()).map_err(|e| Error::io("<manifest>", e))
}

/// Replaces each manifest source with its feature vector, matched on
/// (patient, task, condition). Recordings without features are dropped.
pub fn attach_features(cohort: &Cohort<String>, vectors: Vec<FeatureVector>) -> Result<Cohort<FeatureVector>> {
    crate::features::ensure_common_names(&vectors)?;
    let mut by_ref: HashMap<RecordingRef, FeatureVector> = HashMap::with_capacity(vectors.len());
    for v in vectors {
        let r = v
            .recording()
            .cloned()
            .ok_or_else(|| Error::Schema("feature vector without recording reference".into()))?;
        if by_ref.insert(r.clone(), v).is_some() {
            return Err(Error::Duplicate(format!(
                "features for {}/{}/{}",
                r.patient_id, r.task, r.condition
            )));
        }
    }
    let mut patients = Vec::with_capacity(cohort.len());
    let mut dropped = 0;
    for p in cohort.patients() {
        let mut tasks = BTreeMap::new();
        for &task in p.tasks.keys() {
            let mut rec = TaskRecordings::default();
            for cond in [Condition::Wet, Condition::Dry] {
                if p.tasks[&task].get(cond).is_none() {
                    continue;
                }
                let key = RecordingRef {
                    patient_id: p.patient_id.clone(),
                    task,
                    condition: cond,
                };
                match by_ref.remove(&key) {
                    Some(v) => *rec.slot(cond) = Some(v),
                    None => dropped += 1,
                }
            }
            if rec.wet.is_some() || rec.dry.is_some() {
                tasks.insert(task, rec);
            }
        }
        if !tasks.is_empty() {
            patients.push(PatientRecord {
                patient_id: p.patient_id.clone(),
                sex: p.sex,
                tasks,
            });
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} manifest recordings have no feature row");
    }
    if !by_ref.is_empty() {
        log::warn!("{} feature rows do not appear in the manifest", by_ref.len());
    }
    Cohort::new(patients)
}
