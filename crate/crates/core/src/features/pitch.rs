use crate::audio::{frame_count, frame_geometry, AudioClip};
use crate::error::{Error, Result};

use super::LldTrack;

/// Minimum normalized autocorrelation peak for a frame to count as voiced.
pub const VOICING_THRESHOLD: f64 = 0.45;
/// Frames quieter than this RMS are unvoiced regardless of periodicity.
pub const RMS_GATE: f64 = 0.01;
/// Earliest lag whose peak reaches this fraction of the global maximum wins,
/// which keeps period doubling from halving the estimate.
const OCTAVE_FRACTION: f64 = 0.9;

/// Shortest pitch frame; longer when `f_min` needs it.
pub const PITCH_FRAME_MS: f64 = 25.0;
pub const PITCH_HOP_MS: f64 = 10.0;
/// A pitch frame spans at least this many periods of the lowest allowed F0.
const PERIODS_PER_FRAME: f64 = 3.0;

/// Autocorrelation normalized by the energy of both overlapping segments.
pub(crate) fn normalized_autocorr(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let mut num = 0.0;
    let mut ea = 0.0;
    let mut eb = 0.0;
    for (u, v) in a.iter().zip(b) {
        num += u * v;
        ea += u * u;
        eb += v * v;
    }
    let den = (ea * eb).sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Linear interpolation of the normalized autocorrelation at a fractional lag.
pub(crate) fn autocorr_at(x: &[f64], lag: f64) -> f64 {
    let lo = lag.floor() as usize;
    let frac = lag - lo as f64;
    let r0 = normalized_autocorr(x, lo);
    if frac == 0.0 {
        r0
    } else {
        r0 + (normalized_autocorr(x, lo + 1) - r0) * frac
    }
}

pub(crate) fn demeaned(frame: &[f64]) -> Vec<f64> {
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    frame.iter().map(|v| v - mean).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct PitchEstimate {
    lag: f64,
    peak: f64,
}

fn estimate_frame(frame: &[f64], min_lag: usize, max_lag: usize) -> Option<PitchEstimate> {
    let max_lag = max_lag.min(frame.len().saturating_sub(2));
    if min_lag < 1 || min_lag + 1 >= max_lag {
        return None;
    }
    // r[i] holds lag min_lag - 1 + i so every candidate has both neighbours
    let r: Vec<f64> = (min_lag - 1..=max_lag + 1)
        .map(|lag| normalized_autocorr(frame, lag))
        .collect();
    let inner = 1..r.len() - 1;
    let global = inner.clone().map(|i| r[i]).fold(f64::MIN, f64::max);
    if global <= 0.0 {
        return None;
    }
    let best = inner
        .clone()
        .find(|&i| r[i] >= r[i - 1] && r[i] >= r[i + 1] && r[i] >= OCTAVE_FRACTION * global)
        .or_else(|| inner.clone().find(|&i| r[i] == global))?;
    let (a, b, c) = (r[best - 1], r[best], r[best + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature < 0.0 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(PitchEstimate {
        lag: (min_lag - 1 + best) as f64 + shift,
        peak: b - 0.25 * (a - c) * shift,
    })
}

/// Per-frame F0 (Hz) by normalized autocorrelation; unvoiced frames hold 0.
/// Frames are `max(25 ms, 3 / f_min)` long with a 10 ms hop.
pub fn f0_autocorrelation(clip: &AudioClip, f_min: f64, f_max: f64) -> Result<LldTrack> {
    let sr = f64::from(clip.sample_rate_hz());
    if !(f_min > 0.0 && f_min < f_max && f_max <= sr / 2.0) {
        return Err(Error::Config(format!(
            "pitch range must satisfy 0 < f_min < f_max <= Nyquist, got {f_min}..{f_max}"
        )));
    }
    let frame_ms = PITCH_FRAME_MS.max(PERIODS_PER_FRAME * 1000.0 / f_min);
    let (len, hop) = frame_geometry(clip.sample_rate_hz(), frame_ms, PITCH_HOP_MS)?;
    let n = clip.samples().len();
    let count = frame_count(n, len, hop).ok_or(Error::TooShort { len: n, frame: len })?;
    let min_lag = (sr / f_max).floor() as usize;
    let max_lag = (sr / f_min).ceil() as usize;
    let mut values = Vec::with_capacity(count);
    let mut mask = Vec::with_capacity(count);
    for t in 0..count {
        let raw = &clip.samples()[t * hop..t * hop + len];
        let frame = demeaned(raw);
        let voiced = if rms(&frame) >= RMS_GATE {
            estimate_frame(&frame, min_lag, max_lag).filter(|e| e.peak >= VOICING_THRESHOLD)
        } else {
            None
        };
        match voiced {
            Some(e) => {
                values.push(sr / e.lag);
                mask.push(true);
            }
            None => {
                values.push(0.0);
                mask.push(false);
            }
        }
    }
    Ok(LldTrack {
        name: "f0_hz".into(),
        values,
        mask,
        frame_len: len,
        hop,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn sine(freq: f64, amp: f64, secs: f64) -> AudioClip {
        let sr = 22050.0;
        let n = (secs * sr) as usize;
        AudioClip::new(
            (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / sr).sin()).collect(),
            22050,
        )
        .unwrap()
    }

    #[test]
    fn pure_sine_recovered() {
        let track = f0_autocorrelation(&sine(200.0, 0.5, 1.0), 60.0, 400.0).unwrap();
        assert!(track.mask.iter().all(|&v| v));
        for &f in &track.values {
            assert!((f - 200.0).abs() < 2.0, "{f}");
        }
    }

    #[test]
    fn quiet_noise_is_unvoiced() {
        let mut state = 12345u64;
        let s: Vec<f64> = (0..22050)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * 0.001
            })
            .collect();
        let track = f0_autocorrelation(&AudioClip::new(s, 22050).unwrap(), 60.0, 400.0).unwrap();
        assert!(track.mask.iter().all(|&v| !v));
        assert!(track.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn square_wave_fundamental() {
        let sr = 22050.0;
        let s: Vec<f64> = (0..22050)
            .map(|i| if (100.0 * i as f64 / sr).fract() < 0.5 { 0.4 } else { -0.4 })
            .collect();
        let track = f0_autocorrelation(&AudioClip::new(s, 22050).unwrap(), 60.0, 400.0).unwrap();
        assert!(track.mask.iter().all(|&v| v));
        for &f in &track.values {
            assert!((f - 100.0).abs() < 2.0, "{f}");
        }
    }

    #[test]
    fn invalid_range() {
        assert!(f0_autocorrelation(&sine(200.0, 0.5, 0.1), 400.0, 60.0).is_err());
        assert!(f0_autocorrelation(&sine(200.0, 0.5, 0.1), 60.0, 20000.0).is_err());
    }
}
