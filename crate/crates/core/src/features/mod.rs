//! Acoustic low-level descriptors and the functionals that turn them into
//! one named feature vector per recording.
//!
//! The extracted set has 59 features: five functionals (mean, population std,
//! 20th/50th/80th percentile) over eleven frame tracks (F0, energy, spectral
//! centroid, slope, flux, alpha ratio, Hammarberg index and four band
//! energies), plus voiced fraction, local jitter, local shimmer and HNR.
//! Externally computed tables can be read through [`read_feature_csv`].

mod csv_io;
mod functionals;
mod pitch;
mod spectral;
mod voice;

pub use csv_io::{
    ingest_feature_csvs, parse_feature_csv, read_feature_csv, save_feature_csv, write_feature_csv,
};
pub use functionals::{apply_functionals, percentile_sorted, summarize, VoiceScalars, FUNCTIONALS};
pub use pitch::{f0_autocorrelation, RMS_GATE, VOICING_THRESHOLD};
pub use spectral::{alpha_ratio_linear, spectral_descriptors, ENERGY_BANDS};
pub use voice::{hnr_db, hnr_from_autocorr, jitter_local, local_perturbation, shimmer_local};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::audio::{resample_linear, AudioClip, Spectrogram, SpectrogramParams, CANONICAL_RATE_HZ};
use crate::error::{Error, Result};
use crate::types::RecordingRef;

/// Per-frame values of one descriptor with a validity mask (voicing for F0).
#[derive(Debug, Clone, PartialEq)]
pub struct LldTrack {
    pub name: String,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub frame_len: usize,
    pub hop: usize,
}

impl LldTrack {
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }
}

/// Named, finite feature values for one recording. Non-finite inputs are
/// stored as 0 with `valid = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
    valid: Vec<bool>,
    recording: Option<RecordingRef>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::with_validity(names, values, valid)
    }

    pub fn with_validity(names: Vec<String>, mut values: Vec<f64>, mut valid: Vec<bool>) -> Result<Self> {
        if names.len() != values.len() || valid.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} names, {} values, {} flags",
                names.len(),
                values.len(),
                valid.len()
            )));
        }
        let mut seen = HashSet::with_capacity(names.len());
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Schema(format!("duplicate feature name {dup:?}")));
        }
        for (v, ok) in values.iter_mut().zip(valid.iter_mut()) {
            if !v.is_finite() {
                *v = 0.0;
                *ok = false;
            }
        }
        Ok(FeatureVector {
            names,
            values,
            valid,
            recording: None,
        })
    }

    pub fn with_recording(mut self, recording: RecordingRef) -> Self {
        self.recording = Some(recording);
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn recording(&self) -> Option<&RecordingRef> {
        self.recording.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Copy with every value shifted by `offset` (same length as the vector).
    pub fn offset_by(&self, offset: &[f64]) -> FeatureVector {
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(offset) {
            *v += o;
        }
        out
    }
}

/// Analysis settings for [`extract_features`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub spectrogram: SpectrogramParams,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            f0_min_hz: 60.0,
            f0_max_hz: 400.0,
            spectrogram: SpectrogramParams::default(),
        }
    }
}

/// Full per-recording feature extraction. Clips at other rates are first
/// resampled to 22,050 Hz.
pub fn extract_features(clip: &AudioClip, params: &ExtractionParams) -> Result<FeatureVector> {
    let clip = resample_linear(clip, CANONICAL_RATE_HZ)?;
    let f0 = f0_autocorrelation(&clip, params.f0_min_hz, params.f0_max_hz)?;
    let spec = Spectrogram::from_clip(&clip, &params.spectrogram)?;
    let scalars = VoiceScalars {
        voiced_fraction: f0.valid_fraction(),
        jitter_local: jitter_local(&f0).ok(),
        shimmer_local: shimmer_local(&clip, &f0).ok(),
        hnr_db: hnr_db(&clip, &f0).ok(),
    };
    let mut tracks = vec![f0];
    tracks.extend(spectral_descriptors(&spec)?);
    apply_functionals(&tracks, &scalars)
}

/// Confirms every vector carries the same ordered feature names.
pub fn ensure_common_names(vectors: &[FeatureVector]) -> Result<()> {
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.names() != first.names()) {
            return Err(Error::Schema(format!(
                "feature names differ for recording {:?}",
                bad.recording()
            )));
        }
    }
    Ok(())
}
