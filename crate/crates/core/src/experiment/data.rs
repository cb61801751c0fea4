use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, AudioClip};
use crate::cohort::{attach_features, load_manifest, Cohort, PatientRecord};
use crate::error::{Error, Result};
use crate::features::{extract_features, read_feature_csv, ExtractionParams, FeatureVector};
use crate::types::{Condition, RecordingRef};

/// A recording that could not be read or analysed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadFailure {
    pub source: PathBuf,
    pub reason: String,
}

fn is_feature_table(source: &str) -> bool {
    source.to_ascii_lowercase().ends_with(".csv")
}

/// Manifest sources in cohort order (patient id, task, wet before dry).
fn sources(cohort: &Cohort<String>, base: &Path) -> Vec<(RecordingRef, PathBuf, bool)> {
    let mut out = Vec::new();
    for p in cohort.patients() {
        for (&task, rec) in &p.tasks {
            for cond in [Condition::Wet, Condition::Dry] {
                if let Some(src) = rec.get(cond) {
                    let r = RecordingRef {
                        patient_id: p.patient_id.clone(),
                        task,
                        condition: cond,
                    };
                    out.push((r, base.join(src), is_feature_table(src)));
                }
            }
        }
    }
    out
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Audio clips of a manifest; unreadable files are reported, not fatal.
pub fn load_audio_cohort(manifest: &Path) -> Result<(Cohort<AudioClip>, Vec<LoadFailure>)> {
    let cohort = load_manifest(manifest)?;
    let base = manifest_dir(manifest);
    let entries = sources(&cohort, &base);
    let loaded: Vec<(RecordingRef, PathBuf, Result<AudioClip>)> = entries
        .into_par_iter()
        .map(|(r, path, table)| {
            let clip = if table {
                Err(Error::Unsupported("feature table where audio was expected".into()))
            } else {
                load_wav(&path)
            };
            (r, path, clip)
        })
        .collect();
    let mut failures = Vec::new();
    let mut patients: BTreeMap<String, PatientRecord<AudioClip>> = BTreeMap::new();
    for (r, path, clip) in loaded {
        match clip {
            Ok(c) => {
                let sex = cohort.get(&r.patient_id).expect("manifest patient").sex;
                let p = patients.entry(r.patient_id.clone()).or_insert_with(|| PatientRecord {
                    patient_id: r.patient_id.clone(),
                    sex,
                    tasks: BTreeMap::new(),
                });
                *p.tasks.entry(r.task).or_default().slot(r.condition) = Some(c);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                failures.push(LoadFailure { source: path, reason: e.to_string() });
            }
        }
    }
    Ok((Cohort::new(patients.into_values().collect())?, failures))
}

/// Extracts one feature vector per audio recording of the manifest, in
/// manifest order. Feature-table sources are skipped.
pub fn extract_manifest(manifest: &Path, params: &ExtractionParams) -> Result<(Vec<FeatureVector>, Vec<LoadFailure>)> {
    let cohort = load_manifest(manifest)?;
    let base = manifest_dir(manifest);
    let results: Vec<(PathBuf, Result<FeatureVector>)> = sources(&cohort, &base)
        .into_par_iter()
        .filter(|(_, _, table)| !table)
        .map(|(r, path, _)| {
            let v = load_wav(&path)
                .and_then(|clip| extract_features(&clip, params))
                .map(|v| v.with_recording(r));
            (path, v)
        })
        .collect();
    let mut vectors = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (path, v) in results {
        match v {
            Ok(v) => vectors.push(v),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                failures.push(LoadFailure { source: path, reason: e.to_string() });
            }
        }
    }
    Ok((vectors, failures))
}

/// Feature cohort from a manifest whose sources are WAV files (extracted on
/// the fly) or feature CSV tables (rows matched on patient, task, condition).
pub fn load_feature_cohort(manifest: &Path, params: &ExtractionParams) -> Result<(Cohort<FeatureVector>, Vec<LoadFailure>)> {
    let cohort = load_manifest(manifest)?;
    let base = manifest_dir(manifest);
    let entries = sources(&cohort, &base);
    let mut tables: Vec<PathBuf> = entries.iter().filter(|e| e.2).map(|e| e.1.clone()).collect();
    tables.sort();
    tables.dedup();
    let mut vectors = Vec::new();
    for t in &tables {
        vectors.extend(read_feature_csv(t)?);
    }
    let mut failures = Vec::new();
    if entries.iter().any(|e| !e.2) {
        let (extracted, f) = extract_manifest(manifest, params)?;
        vectors.extend(extracted);
        failures = f;
    }
    let attached = attach_features(&cohort, vectors)?;
    Ok((attached, failures))
}
