use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cohort::{Cohort, ManifestEntry, PatientRecord, TaskRecordings};
use crate::error::{Error, Result};
use crate::features::{save_feature_csv, FeatureVector};
use crate::types::{Condition, RecordingRef};

use super::{prepare_output_dir, GroundTruth, SynthConfig, SynthMode, FEATURES_FILE, MANIFEST_FILE, TRUTH_FILE};

pub struct FeatureCohort {
    pub cohort: Cohort<FeatureVector>,
    pub truth: GroundTruth,
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Dry `b = base + speaker + noise`, wet `a = b + effect + noise`. The speaker
/// offset is drawn once per patient and shared by every task and condition.
/// The effect has magnitude δ and a random sign on `round(effect_fraction · n)`
/// randomly chosen features.
pub fn gen_feature_cohort(cfg: &SynthConfig) -> Result<FeatureCohort> {
    cfg.validate()?;
    if cfg.mode != SynthMode::Feature {
        return Err(Error::Config("gen_feature_cohort needs mode = feature".into()));
    }
    let d = cfg.n_features;
    let names: Vec<String> = (0..d).map(|j| format!("feat_{j:03}")).collect();
    let mut rng = cfg.cohort_rng();
    let n_eff = (d as f64 * cfg.effect_fraction).round() as usize;
    let mut effect = vec![0.0; d];
    let mut affected = sample(&mut rng, d, n_eff).into_vec();
    affected.sort_unstable();
    for j in affected {
        effect[j] = if rng.random_bool(0.5) { cfg.effect_scale } else { -cfg.effect_scale };
    }
    let base: BTreeMap<_, Vec<f64>> = cfg
        .tasks
        .iter()
        .map(|&t| (t, (0..d).map(|_| normal(&mut rng)).collect()))
        .collect();

    let patients = cfg.patients();
    let built: Vec<(PatientRecord<FeatureVector>, Vec<f64>)> = patients
        .par_iter()
        .enumerate()
        .map(|(i, (id, sex))| {
            let mut rng = cfg.patient_rng(i);
            let speaker: Vec<f64> = (0..d).map(|_| cfg.confound_scale * normal(&mut rng)).collect();
            let mut tasks = BTreeMap::new();
            for &task in &cfg.tasks {
                let dry: Vec<f64> = (0..d)
                    .map(|j| base[&task][j] + speaker[j] + cfg.noise_scale * normal(&mut rng))
                    .collect();
                let wet: Vec<f64> = (0..d)
                    .map(|j| dry[j] + effect[j] + cfg.noise_scale * normal(&mut rng))
                    .collect();
                let vector = |values, condition| -> Result<FeatureVector> {
                    Ok(FeatureVector::new(names.clone(), values)?.with_recording(RecordingRef {
                        patient_id: id.clone(),
                        task,
                        condition,
                    }))
                };
                tasks.insert(
                    task,
                    TaskRecordings {
                        wet: Some(vector(wet, Condition::Wet)?),
                        dry: Some(vector(dry, Condition::Dry)?),
                    },
                );
            }
            Ok((PatientRecord { patient_id: id.clone(), sex: *sex, tasks }, speaker))
        })
        .collect::<Result<_>>()?;

    let mut speaker_offsets = BTreeMap::new();
    let mut records = Vec::with_capacity(built.len());
    for (rec, speaker) in built {
        speaker_offsets.insert(rec.patient_id.clone(), speaker);
        records.push(rec);
    }
    Ok(FeatureCohort {
        cohort: Cohort::new(records)?,
        truth: GroundTruth {
            config: cfg.clone(),
            speaker_offsets,
            speaker_f0_hz: BTreeMap::new(),
            effect,
            feature_names: names,
            planted_band_hz: cfg.planted_band_hz,
        },
    })
}

impl FeatureCohort {
    pub fn manifest_entries(&self) -> Vec<ManifestEntry> {
        self.vectors()
            .map(|v| {
                let r = v.recording().expect("synthetic vectors carry their recording");
                ManifestEntry {
                    patient_id: r.patient_id.clone(),
                    sex: self.cohort.get(&r.patient_id).expect("patient").sex,
                    task: r.task,
                    condition: r.condition,
                    source: FEATURES_FILE.to_string(),
                }
            })
            .collect()
    }

    /// Patients in id order, tasks in order, wet before dry.
    pub fn vectors(&self) -> impl Iterator<Item = &FeatureVector> {
        self.cohort
            .patients()
            .iter()
            .flat_map(|p| p.tasks.values())
            .flat_map(|r| r.wet.iter().chain(r.dry.iter()))
    }

    /// Writes `manifest.csv`, `features.csv` and `ground_truth.json`.
    pub fn write(&self, dir: &Path, force: bool) -> Result<()> {
        prepare_output_dir(dir, force)?;
        let manifest = dir.join(MANIFEST_FILE);
        let file = std::fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
        crate::cohort::write_manifest(file, &self.manifest_entries())?;
        let vectors: Vec<FeatureVector> = self.vectors().cloned().collect();
        save_feature_csv(dir.join(FEATURES_FILE), &vectors)?;
        self.truth.save(dir.join(TRUTH_FILE))
    }
}
