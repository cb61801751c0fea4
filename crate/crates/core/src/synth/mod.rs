//! Synthetic paired cohorts with per-speaker offsets and a controllable
//! wet-state effect, in feature space or as audio.

mod feature;
mod signal;

pub use feature::{gen_feature_cohort, FeatureCohort};
pub use signal::{gen_signal_cohort, planted_band_energy, SignalCohort, SynthClip};

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Sex, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    Feature,
    Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub n_patients: usize,
    /// Fraction of patients that are female.
    pub female_fraction: f64,
    /// δ: wet-state shift. Feature units in feature mode; in signal mode the
    /// added planted-band power relative to the dry clip's own band power.
    pub effect_scale: f64,
    /// σ_s: per-speaker offset scale.
    pub confound_scale: f64,
    /// σ_n: independent noise per recording.
    pub noise_scale: f64,
    pub planted_band_hz: (f64, f64),
    pub seed: u64,
    pub tasks: Vec<Task>,
    /// Feature mode: vector length.
    pub n_features: usize,
    /// Feature mode: share of features carrying the effect.
    pub effect_fraction: f64,
    /// Signal mode: clip length.
    pub duration_s: f64,
    pub sample_rate_hz: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mode: SynthMode::Feature,
            n_patients: 60,
            female_fraction: 0.5,
            effect_scale: 1.0,
            confound_scale: 3.0,
            noise_scale: 0.3,
            planted_band_hz: (700.0, 900.0),
            seed: 0,
            tasks: vec![Task::Pg],
            n_features: 40,
            effect_fraction: 0.2,
            duration_s: 2.0,
            sample_rate_hz: crate::audio::CANONICAL_RATE_HZ,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = [self.effect_scale, self.confound_scale, self.noise_scale];
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config(format!("scales must be finite and non-negative, got {scales:?}")));
        }
        if self.n_patients < 2 {
            return Err(Error::Config(format!("need at least 2 patients, got {}", self.n_patients)));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return Err(Error::Config(format!("female fraction {} outside [0, 1]", self.female_fraction)));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("no tasks requested".into()));
        }
        let (lo, hi) = self.planted_band_hz;
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::Config(format!("planted band ({lo}, {hi}) is not an interval")));
        }
        if hi > nyquist {
            return Err(Error::Config(format!("planted band ({lo}, {hi}) exceeds Nyquist {nyquist} Hz")));
        }
        match self.mode {
            SynthMode::Feature => {
                if self.n_features == 0 || !(0.0..=1.0).contains(&self.effect_fraction) {
                    return Err(Error::Config("feature mode needs n_features > 0 and effect_fraction in [0, 1]".into()));
                }
            }
            SynthMode::Signal => {
                if !(self.duration_s > 0.1 && self.duration_s.is_finite()) || self.sample_rate_hz < 8000 {
                    return Err(Error::Config("signal mode needs duration > 0.1 s and rate >= 8 kHz".into()));
                }
            }
        }
        Ok(())
    }

    /// Stable ids `P001`, `P002`, ... with the first `round(n · female_fraction)` female.
    pub fn patients(&self) -> Vec<(String, Sex)> {
        let n_f = (self.n_patients as f64 * self.female_fraction).round() as usize;
        let width = self.n_patients.to_string().len().max(3);
        (0..self.n_patients)
            .map(|i| {
                let sex = if i < n_f { Sex::Female } else { Sex::Male };
                (format!("P{:0width$}", i + 1), sex)
            })
            .collect()
    }

    /// Independent generator for one patient, so patients can be built in parallel.
    pub(crate) fn patient_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        rng
    }

    pub(crate) fn cohort_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// What the generator planted, kept next to the data for oracle checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Feature mode: the per-dimension offset. Signal mode: `[formant_scale, log_gain]`.
    pub speaker_offsets: BTreeMap<String, Vec<f64>>,
    /// Signal mode only.
    pub speaker_f0_hz: BTreeMap<String, f64>,
    /// Feature mode: per-feature wet shift. Signal mode: `[δ]`.
    pub effect: Vec<f64>,
    pub feature_names: Vec<String>,
    pub planted_band_hz: (f64, f64),
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Features whose effect is nonzero.
    pub fn affected_features(&self) -> Vec<&str> {
        self.feature_names
            .iter()
            .zip(&self.effect)
            .filter(|(_, e)| **e != 0.0)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const FEATURES_FILE: &str = "features.csv";

/// Fails unless `dir` is missing or empty, or `force` is set. Creates it.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::Refusal(dir.to_path_buf()));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
