use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{write_wav, AudioClip};
use crate::cohort::{write_manifest, Cohort, ManifestEntry, PatientRecord};
use crate::error::{Error, Result};
use crate::types::{Condition, Sex, Task};

use super::{prepare_output_dir, GroundTruth, SynthConfig, SynthMode, MANIFEST_FILE, TRUTH_FILE};

/// RMS of the harmonic source before the speaker gain.
const SOURCE_RMS: f64 = 0.1;
const HARMONIC_CEILING_HZ: f64 = 5000.0;
const BAND_PARTIALS: usize = 64;
const F0_RANGE_HZ: (f64, f64) = (90.0, 230.0);

/// Formant centres and bandwidths in Hz per task (vowel-like targets).
fn formants(task: Task) -> [(f64, f64); 3] {
    match task {
        Task::Pg => [(730.0, 90.0), (1090.0, 110.0), (2440.0, 170.0)],
        Task::Mm => [(300.0, 70.0), (1300.0, 120.0), (2300.0, 170.0)],
        Task::Mlh => [(400.0, 80.0), (1700.0, 120.0), (2600.0, 170.0)],
        Task::C => [(600.0, 90.0), (1200.0, 110.0), (2500.0, 170.0)],
    }
}

#[derive(Debug, Clone)]
pub struct SynthClip {
    pub entry: ManifestEntry,
    pub clip: AudioClip,
}

impl SynthClip {
    pub fn file_name(&self) -> String {
        let e = &self.entry;
        format!("{}_{}_{}.wav", e.patient_id, e.task, e.condition)
    }
}

pub struct SignalCohort {
    /// Patients in id order, tasks in order, wet before dry.
    pub clips: Vec<SynthClip>,
    pub truth: GroundTruth,
}

struct Speaker {
    f0: f64,
    formant_scale: f64,
    log_gain: f64,
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Mean power per sample of the part of `samples` inside `[lo, hi)` Hz,
/// measured on one zero-padded FFT of the whole clip.
pub fn planted_band_energy(samples: &[f64], sample_rate_hz: u32, lo: f64, hi: f64) -> f64 {
    let n = samples.len().next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin_hz = sample_rate_hz as f64 / n as f64;
    let mut power = 0.0;
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * bin_hz;
        if f >= lo && f < hi {
            let w = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            power += w * c.norm_sqr();
        }
    }
    power / (n as f64 * samples.len() as f64)
}

fn harmonic_source(speaker: &Speaker, task: Task, phases: &[f64], n: usize, sr: f64) -> Vec<f64> {
    let f = formants(task);
    let envelope = |hz: f64| {
        0.02 + f
            .iter()
            .map(|&(c, b)| {
                let c = c * speaker.formant_scale;
                1.0 / (1.0 + ((hz - c) / b).powi(2))
            })
            .sum::<f64>()
    };
    let ceiling = HARMONIC_CEILING_HZ.min(0.45 * sr);
    let n_harm = ((ceiling / speaker.f0).floor() as usize).clamp(1, phases.len());
    let amps: Vec<f64> = (1..=n_harm)
        .map(|k| envelope(k as f64 * speaker.f0) / (k as f64).sqrt())
        .collect();
    let mut out = vec![0.0; n];
    let mut phase = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        // slow 5 Hz vibrato of 0.5 %
        let f0 = speaker.f0 * (1.0 + 0.005 * (2.0 * PI * 5.0 * t).sin());
        phase += 2.0 * PI * f0 / sr;
        *o = amps
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * phase + phases[k]).sin())
            .sum();
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let g = SOURCE_RMS * speaker.log_gain.exp() / rms;
    out.iter_mut().for_each(|v| *v *= g);
    out
}

fn band_noise(rng: &mut impl Rng, n: usize, sr: f64, lo: f64, hi: f64, power: f64) -> Vec<f64> {
    let partials: Vec<(f64, f64)> = (0..BAND_PARTIALS)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(0.0..2.0 * PI)))
        .collect();
    // each unit sinusoid carries power 1/2
    let amp = (2.0 * power / BAND_PARTIALS as f64).sqrt();
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            amp * partials.iter().map(|&(f, p)| (2.0 * PI * f * t + p).sin()).sum::<f64>()
        })
        .collect()
}

/// Per patient: F0 uniform in 90–230 Hz, formant scale `exp(0.03 σ_s z)` and
/// gain `exp(0.1 σ_s z')`, all shared by every clip of that patient. Harmonic
/// phases are shared by the wet and dry clip of a task. The wet clip adds
/// band-limited noise inside the planted band whose power is δ times the dry
/// clip's own power in that band, so δ = 1 doubles the band energy. Both clips
/// get independent white noise with std `σ_n · 0.1`.
pub fn gen_signal_cohort(cfg: &SynthConfig) -> Result<SignalCohort> {
    cfg.validate()?;
    if cfg.mode != SynthMode::Signal {
        return Err(Error::Config("gen_signal_cohort needs mode = signal".into()));
    }
    let sr = cfg.sample_rate_hz as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let (lo, hi) = cfg.planted_band_hz;
    let max_harm = (HARMONIC_CEILING_HZ / F0_RANGE_HZ.0).ceil() as usize;
    let patients = cfg.patients();
    let built: Vec<(Vec<SynthClip>, Speaker)> = patients
        .par_iter()
        .enumerate()
        .map(|(i, (id, sex))| {
            let mut rng = cfg.patient_rng(i);
            let speaker = Speaker {
                f0: rng.random_range(F0_RANGE_HZ.0..F0_RANGE_HZ.1),
                formant_scale: (0.03 * cfg.confound_scale * normal(&mut rng)).exp().clamp(0.8, 1.25),
                log_gain: (0.1 * cfg.confound_scale * normal(&mut rng)).clamp(-0.7, 0.7),
            };
            let mut clips = Vec::with_capacity(2 * cfg.tasks.len());
            for &task in &cfg.tasks {
                let phases: Vec<f64> = (0..max_harm).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                let source = harmonic_source(&speaker, task, &phases, n, sr);
                let band_power = planted_band_energy(&source, cfg.sample_rate_hz, lo, hi);
                let planted = band_noise(&mut rng, n, sr, lo, hi, cfg.effect_scale * band_power);
                for condition in [Condition::Wet, Condition::Dry] {
                    let samples: Vec<f64> = source
                        .iter()
                        .zip(&planted)
                        .map(|(s, p)| {
                            let wet = if condition == Condition::Wet { *p } else { 0.0 };
                            s + wet + 0.1 * cfg.noise_scale * normal(&mut rng)
                        })
                        .collect();
                    let entry = ManifestEntry {
                        patient_id: id.clone(),
                        sex: *sex,
                        task,
                        condition,
                        source: String::new(),
                    };
                    let mut clip = SynthClip {
                        entry,
                        clip: AudioClip::new(samples, cfg.sample_rate_hz)?,
                    };
                    clip.entry.source = clip.file_name();
                    clips.push(clip);
                }
            }
            Ok((clips, speaker))
        })
        .collect::<Result<_>>()?;

    let mut clips = Vec::new();
    let mut speaker_offsets = BTreeMap::new();
    let mut speaker_f0_hz = BTreeMap::new();
    for ((id, _), (c, s)) in patients.iter().zip(built) {
        speaker_offsets.insert(id.clone(), vec![s.formant_scale, s.log_gain]);
        speaker_f0_hz.insert(id.clone(), s.f0);
        clips.extend(c);
    }
    Ok(SignalCohort {
        clips,
        truth: GroundTruth {
            config: cfg.clone(),
            speaker_offsets,
            speaker_f0_hz,
            effect: vec![cfg.effect_scale],
            feature_names: Vec::new(),
            planted_band_hz: cfg.planted_band_hz,
        },
    })
}

impl SignalCohort {
    /// The clips arranged as a cohort.
    pub fn audio_cohort(&self) -> Result<Cohort<AudioClip>> {
        let mut patients: BTreeMap<&str, PatientRecord<AudioClip>> = BTreeMap::new();
        for c in &self.clips {
            let e = &c.entry;
            let p = patients.entry(&e.patient_id).or_insert_with(|| PatientRecord {
                patient_id: e.patient_id.clone(),
                sex: e.sex,
                tasks: BTreeMap::new(),
            });
            *p.tasks.entry(e.task).or_default().slot(e.condition) = Some(c.clip.clone());
        }
        Cohort::new(patients.into_values().collect())
    }

    pub fn manifest_entries(&self) -> Vec<ManifestEntry> {
        self.clips.iter().map(|c| c.entry.clone()).collect()
    }

    pub fn sex_of(&self, patient_id: &str) -> Option<Sex> {
        self.clips.iter().find(|c| c.entry.patient_id == patient_id).map(|c| c.entry.sex)
    }

    /// Writes one WAV per clip plus `manifest.csv` and `ground_truth.json`.
    pub fn write(&self, dir: &Path, force: bool) -> Result<()> {
        prepare_output_dir(dir, force)?;
        self.clips
            .par_iter()
            .try_for_each(|c| write_wav(dir.join(c.file_name()), &c.clip))?;
        let manifest = dir.join(MANIFEST_FILE);
        let file = std::fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
        write_manifest(file, &self.manifest_entries())?;
        self.truth.save(dir.join(TRUTH_FILE))
    }
}
