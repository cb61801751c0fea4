//! Cycle-to-cycle perturbation measures and harmonics-to-noise ratio.

use crate::audio::AudioClip;
use crate::error::{Error, Result};

use super::pitch::{autocorr_at, demeaned};
use super::LldTrack;

/// Mean absolute difference between consecutive present values divided by the
/// mean of all present values. `None` entries break the chain.
pub fn local_perturbation(seq: &[Option<f64>]) -> Result<f64> {
    let diffs: Vec<f64> = seq
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((b - a).abs()),
            _ => None,
        })
        .collect();
    if diffs.is_empty() {
        return Err(Error::InsufficientVoicing(
            "need at least two consecutive voiced frames".into(),
        ));
    }
    let present: Vec<f64> = seq.iter().flatten().copied().collect();
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    if mean <= 0.0 {
        return Err(Error::Degenerate("non-positive mean value".into()));
    }
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64 / mean)
}

/// Local jitter over the periods `1/F0` of consecutive voiced frames.
pub fn jitter_local(f0: &LldTrack) -> Result<f64> {
    let periods: Vec<Option<f64>> = f0
        .values
        .iter()
        .zip(&f0.mask)
        .map(|(&f, &v)| (v && f > 0.0).then(|| 1.0 / f))
        .collect();
    local_perturbation(&periods)
}

/// Local shimmer over per-frame peak amplitudes of consecutive voiced frames.
pub fn shimmer_local(clip: &AudioClip, f0: &LldTrack) -> Result<f64> {
    let amps: Vec<Option<f64>> = f0
        .mask
        .iter()
        .enumerate()
        .map(|(t, &voiced)| {
            voiced.then(|| {
                let frame = &clip.samples()[t * f0.hop..t * f0.hop + f0.frame_len];
                frame.iter().fold(0.0f64, |m, s| m.max(s.abs()))
            })
        })
        .collect();
    local_perturbation(&amps)
}

/// `10·log10(r / (1 − r))` with `r` clamped into the open unit interval.
pub fn hnr_from_autocorr(r: f64) -> f64 {
    let r = r.clamp(1e-6, 1.0 - 1e-6);
    10.0 * (r / (1.0 - r)).log10()
}

/// Mean per-frame HNR (dB) over voiced frames, using the autocorrelation at each frame's F0 lag.
pub fn hnr_db(clip: &AudioClip, f0: &LldTrack) -> Result<f64> {
    let sr = f64::from(clip.sample_rate_hz());
    let per_frame: Vec<f64> = f0
        .values
        .iter()
        .zip(&f0.mask)
        .enumerate()
        .filter(|(_, (&f, &v))| v && f > 0.0)
        .map(|(t, (&f, _))| {
            let frame = demeaned(&clip.samples()[t * f0.hop..t * f0.hop + f0.frame_len]);
            hnr_from_autocorr(autocorr_at(&frame, sr / f))
        })
        .collect();
    if per_frame.is_empty() {
        return Err(Error::InsufficientVoicing("no voiced frame".into()));
    }
    Ok(per_frame.iter().sum::<f64>() / per_frame.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::pitch::f0_autocorrelation;
    use crate::features::pitch::tests::sine;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn track(values: Vec<f64>) -> LldTrack {
        let mask = values.iter().map(|&v| v > 0.0).collect();
        LldTrack {
            name: "f0_hz".into(),
            values,
            mask,
            frame_len: 551,
            hop: 220,
        }
    }

    #[test]
    fn constant_f0_has_no_jitter() {
        assert_eq!(jitter_local(&track(vec![150.0; 20])).unwrap(), 0.0);
    }

    #[test]
    fn alternating_f0_jitter() {
        let f0: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 100.0 } else { 110.0 }).collect();
        let j = jitter_local(&track(f0)).unwrap();
        // |0.01 − 1/110| / mean(0.01, 1/110)
        let expected = (0.01 - 1.0 / 110.0) / ((0.01 + 1.0 / 110.0) / 2.0);
        assert!((j - expected).abs() < 1e-12);
        assert!((j - 0.09524).abs() < 1e-5);
    }

    #[test]
    fn jitter_needs_consecutive_voicing() {
        assert!(matches!(
            jitter_local(&track(vec![0.0; 10])),
            Err(Error::InsufficientVoicing(_))
        ));
        // voiced frames never adjacent
        assert!(matches!(
            jitter_local(&track(vec![100.0, 0.0, 110.0, 0.0, 120.0])),
            Err(Error::InsufficientVoicing(_))
        ));
    }

    #[test]
    fn alternating_amplitude_shimmer() {
        let amps: Vec<Option<f64>> = (0..30).map(|i| Some(if i % 2 == 0 { 0.4 } else { 0.5 })).collect();
        let s = local_perturbation(&amps).unwrap();
        assert!((s - 0.1 / 0.45).abs() < 1e-12);
        assert!((s - 0.2222).abs() < 1e-4);
    }

    #[test]
    fn constant_sine_has_small_shimmer() {
        let clip = sine(200.0, 0.5, 1.0);
        let f0 = f0_autocorrelation(&clip, 60.0, 400.0).unwrap();
        assert!(shimmer_local(&clip, &f0).unwrap() < 0.01);
        let silent = track(vec![0.0; 10]);
        assert!(matches!(shimmer_local(&clip, &silent), Err(Error::InsufficientVoicing(_))));
    }

    #[test]
    fn hnr_reference_points() {
        assert_eq!(hnr_from_autocorr(0.5), 0.0);
        let clip = sine(200.0, 0.5, 1.0);
        let f0 = f0_autocorrelation(&clip, 60.0, 400.0).unwrap();
        assert!(hnr_db(&clip, &f0).unwrap() > 20.0);
        assert!(matches!(hnr_db(&clip, &track(vec![0.0; 5])), Err(Error::InsufficientVoicing(_))));
    }

    #[test]
    fn equal_power_noise_gives_zero_db() {
        let clean = sine(200.0, 0.5, 1.0);
        // sine power a²/2 = 0.125 → noise std √0.125
        let noise = Normal::new(0.0, 0.125f64.sqrt()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<f64> = clean.samples().iter().map(|s| s + noise.sample(&mut rng)).collect();
        let clip = AudioClip::new(noisy, 22050).unwrap();
        let f0 = f0_autocorrelation(&clip, 60.0, 400.0).unwrap();
        let hnr = hnr_db(&clip, &f0).unwrap();
        assert!(hnr.abs() < 1.5, "{hnr}");
    }
}
