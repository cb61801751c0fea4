//! Audio ingestion and time-frequency primitives.

mod mel;
mod spectrum;
mod wav;

pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, mfcc, MelFilterBank};
pub use spectrum::{stft_power, Spectrogram, SpectrogramParams};
pub use wav::{decode_wav, encode_wav, load_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sample rate of every recording in a cohort.
pub const CANONICAL_RATE_HZ: u32 = 22_050;

/// Mono audio with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Format("empty clip".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(AudioClip {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Scales every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// Linear-interpolation resampler.
///
/// Output length is `round(len · target / source)`. The first and last samples
/// of input and output are aligned, so a ramp stays an exact ramp.
pub fn resample_linear(clip: &AudioClip, target_hz: u32) -> Result<AudioClip> {
    if target_hz == 0 {
        return Err(Error::Config("target rate must be positive".into()));
    }
    if target_hz == clip.sample_rate_hz {
        return Ok(clip.clone());
    }
    let n = clip.samples.len();
    let m = ((n as f64) * f64::from(target_hz) / f64::from(clip.sample_rate_hz)).round() as usize;
    let m = m.max(1);
    let src = &clip.samples;
    let samples = if m == 1 || n == 1 {
        vec![src[0]; m]
    } else {
        let step = (n - 1) as f64 / (m - 1) as f64;
        (0..m)
            .map(|j| {
                let x = j as f64 * step;
                let i = (x.floor() as usize).min(n - 2);
                let frac = x - i as f64;
                src[i] + (src[i + 1] - src[i]) * frac
            })
            .collect()
    };
    AudioClip::new(samples, target_hz)
}

/// Hann-windowed, overlapping frames of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
}

/// Frame and hop lengths in samples for the given durations.
pub fn frame_geometry(sample_rate_hz: u32, frame_ms: f64, hop_ms: f64) -> Result<(usize, usize)> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(Error::Config(format!(
            "need frame_ms >= hop_ms > 0, got frame {frame_ms} ms / hop {hop_ms} ms"
        )));
    }
    let sr = f64::from(sample_rate_hz);
    let len = (frame_ms * sr / 1000.0).floor() as usize;
    let hop = (hop_ms * sr / 1000.0).floor() as usize;
    if len == 0 || hop == 0 {
        return Err(Error::Config("frame or hop shorter than one sample".into()));
    }
    Ok((len, hop))
}

/// Number of frames `floor((n − len) / hop) + 1`; `None` when `n < len`.
pub fn frame_count(n: usize, len: usize, hop: usize) -> Option<usize> {
    (n >= len).then(|| (n - len) / hop + 1)
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect()
}

pub fn frame_signal(clip: &AudioClip, frame_ms: f64, hop_ms: f64) -> Result<Frames> {
    let (len, hop) = frame_geometry(clip.sample_rate_hz, frame_ms, hop_ms)?;
    let n = clip.samples.len();
    let count = frame_count(n, len, hop).ok_or(Error::TooShort { len: n, frame: len })?;
    let window = hann(len);
    let frames = (0..count)
        .map(|t| {
            clip.samples[t * hop..t * hop + len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(Frames {
        frames,
        frame_len: len,
        hop,
        sample_rate_hz: clip.sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resample_same_rate_is_identity() {
        let clip = AudioClip::new(vec![0.1, -0.2, 0.3], 22050).unwrap();
        assert_eq!(resample_linear(&clip, 22050).unwrap(), clip);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let clip = AudioClip::new(vec![0.3; 441], 44100).unwrap();
        for target in [8000, 22050, 96000] {
            let out = resample_linear(&clip, target).unwrap();
            assert!(out.samples().iter().all(|&s| (s - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn resample_ramp_upsampled_stays_ramp() {
        let ramp: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let clip = AudioClip::new(ramp, 100).unwrap();
        let out = resample_linear(&clip, 200).unwrap();
        assert_eq!(out.samples().len(), 200);
        let worst = out
            .samples()
            .iter()
            .enumerate()
            .map(|(j, &s)| (s - j as f64 / 199.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "max deviation {worst}");
    }

    #[test]
    fn framing_defaults_at_canonical_rate() {
        let clip = AudioClip::new(vec![0.0; 22050], 22050).unwrap();
        let frames = frame_signal(&clip, 25.0, 10.0).unwrap();
        assert_eq!(frames.frame_len, 551);
        assert_eq!(frames.hop, 220);
        assert_eq!(frames.frames.len(), 98);
    }

    #[test]
    fn framing_boundaries() {
        let exact = AudioClip::new(vec![0.1; 551], 22050).unwrap();
        assert_eq!(frame_signal(&exact, 25.0, 10.0).unwrap().frames.len(), 1);
        let short = AudioClip::new(vec![0.1; 550], 22050).unwrap();
        assert!(matches!(
            frame_signal(&short, 25.0, 10.0),
            Err(Error::TooShort { len: 550, frame: 551 })
        ));
        assert!(frame_signal(&exact, 5.0, 10.0).is_err());
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![], 22050).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 22050).is_err());
        assert!(AudioClip::new(vec![0.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn frame_count_formula(len in 1usize..600, hop_frac in 0.05f64..1.0, extra in 0usize..5000) {
            let hop = ((len as f64 * hop_frac).floor() as usize).max(1);
            let n = len + extra;
            let clip = AudioClip::new(vec![0.25; n], 1000).unwrap();
            let frames = frame_signal(&clip, len as f64, hop as f64).unwrap();
            prop_assert_eq!(frames.frame_len, len);
            prop_assert_eq!(frames.frames.len(), (n - len) / hop + 1);
        }
    }
}
