use crate::error::{Error, Result};

use super::{FeatureVector, LldTrack};

pub const FUNCTIONALS: [&str; 5] = ["mean", "std", "p20", "p50", "p80"];

/// Recording-level voice-quality scalars; `None` where the clip has too little voicing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoiceScalars {
    pub voiced_fraction: f64,
    pub jitter_local: Option<f64>,
    pub shimmer_local: Option<f64>,
    pub hnr_db: Option<f64>,
}

/// Percentile `q ∈ [0, 1]` of sorted data by linear interpolation between order statistics.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// mean, population std, p20, p50, p80.
pub fn summarize(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some([
        mean,
        var.sqrt(),
        percentile_sorted(&sorted, 0.2),
        percentile_sorted(&sorted, 0.5),
        percentile_sorted(&sorted, 0.8),
    ])
}

/// Collapses LLD tracks into a named feature vector: five functionals per
/// track over its valid frames, then the four voice scalars.
pub fn apply_functionals(tracks: &[LldTrack], scalars: &VoiceScalars) -> Result<FeatureVector> {
    if tracks.is_empty() {
        return Err(Error::InsufficientData("no LLD tracks".into()));
    }
    let mut names = Vec::with_capacity(tracks.len() * FUNCTIONALS.len() + 4);
    let mut values = Vec::with_capacity(names.capacity());
    let mut valid = Vec::with_capacity(names.capacity());
    for track in tracks {
        if track.values.len() != track.mask.len() {
            return Err(Error::Shape(format!(
                "track {} has {} values but {} mask entries",
                track.name,
                track.values.len(),
                track.mask.len()
            )));
        }
        let present: Vec<f64> = track.valid_values().collect();
        let stats = summarize(&present);
        for (i, f) in FUNCTIONALS.iter().enumerate() {
            names.push(format!("{}.{f}", track.name));
            values.push(stats.map_or(0.0, |s| s[i]));
            valid.push(stats.is_some());
        }
    }
    let optional = [
        ("jitter_local", scalars.jitter_local),
        ("shimmer_local", scalars.shimmer_local),
        ("hnr_db", scalars.hnr_db),
    ];
    names.push("voiced_fraction".into());
    values.push(scalars.voiced_fraction);
    valid.push(true);
    for (name, v) in optional {
        names.push(name.into());
        values.push(v.unwrap_or(0.0));
        valid.push(v.is_some());
    }
    FeatureVector::with_validity(names, values, valid)
}
