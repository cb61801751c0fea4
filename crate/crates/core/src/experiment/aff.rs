use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{mel_filterbank, AudioClip, Spectrogram, SpectrogramParams};
use crate::cohort::{split_by_patient, Cohort, SplitPlan};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    aff_init_mfcc, aggregate_curves, evaluate, importance_curve, train, AffModel, DenseNet3, EncoderKind,
    ImportanceAggregate, Metrics, SeqEncoder, TrainConfig, TrainReport, DEFAULT_TRIM_HALFWIDTH,
};
use crate::types::{Condition, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffConfig {
    pub spectrogram: SpectrogramParams,
    /// d_new: number of learnable filters.
    pub n_filters: usize,
    pub mel_low_hz: f64,
    /// Defaults to Nyquist.
    pub mel_high_hz: Option<f64>,
    pub encoder: EncoderKind,
    pub d_ff: usize,
    pub hidden: (usize, usize),
    pub trim_halfwidth_bins: usize,
    pub trim_period_epochs: usize,
    pub train: TrainConfig,
    pub test_ratio: f64,
}

impl Default for AffConfig {
    fn default() -> Self {
        AffConfig {
            spectrogram: SpectrogramParams::default(),
            n_filters: 26,
            mel_low_hz: 0.0,
            mel_high_hz: None,
            encoder: EncoderKind::MeanPool,
            d_ff: 32,
            hidden: (32, 16),
            trim_halfwidth_bins: DEFAULT_TRIM_HALFWIDTH,
            // trimming every epoch keeps the weight mass Adam moves outside a
            // window small, so each trim barely disturbs the head
            trim_period_epochs: 1,
            train: TrainConfig {
                lr: 3e-3,
                epochs: 100,
                batch_size: 8,
                seed: 0,
                trim: true,
            },
            test_ratio: 0.3,
        }
    }
}

/// Power spectrogram of every clip, in parallel.
pub fn spectrogram_cohort(cohort: &Cohort<AudioClip>, params: &SpectrogramParams) -> Result<Cohort<Matrix>> {
    let clips: Vec<&AudioClip> = cohort
        .patients()
        .iter()
        .flat_map(|p| p.tasks.values())
        .flat_map(|r| r.wet.iter().chain(r.dry.iter()))
        .collect();
    let specs: Vec<Matrix> = clips
        .par_iter()
        .map(|c| Ok(Spectrogram::from_clip(c, params)?.power))
        .collect::<Result<_>>()?;
    let mut it = specs.into_iter();
    Ok(cohort.clone().map(|_| it.next().expect("one spectrogram per clip")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffTaskResult {
    pub task: Task,
    pub seed: u64,
    pub curve: Vec<f64>,
    pub peak_bin: usize,
    pub peak_hz: f64,
    pub metrics: Metrics,
    pub training: TrainReport,
    pub split: SplitPlan,
    pub model: AffModel,
}

fn labelled(cohort: &Cohort<Matrix>, task: Task, ids: &[String]) -> (Vec<Matrix>, Vec<usize>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for id in ids {
        let Some(rec) = cohort.get(id).and_then(|p| p.task(task)) else { continue };
        for cond in [Condition::Wet, Condition::Dry] {
            if let Some(s) = rec.get(cond) {
                x.push(s.clone());
                y.push(cond.label());
            }
        }
    }
    (x, y)
}

/// Trains an MFCC-initialised AFF classifier (wet vs dry spectrograms) on a
/// patient split of one task and returns its importance curve.
pub fn train_aff_task(
    cohort: &Cohort<Matrix>,
    task: Task,
    sample_rate_hz: u32,
    cfg: &AffConfig,
    seed: u64,
) -> Result<AffTaskResult> {
    let cohort = cohort.for_task(task);
    let split = split_by_patient(&cohort, cfg.test_ratio, seed)?;
    let (train_x, train_y) = labelled(&cohort, task, &split.train);
    let (test_x, test_y) = labelled(&cohort, task, &split.test);
    let d_freq = train_x
        .first()
        .map(Matrix::cols)
        .ok_or_else(|| Error::InsufficientData(format!("no {task} spectrograms")))?;
    let high = cfg.mel_high_hz.unwrap_or(sample_rate_hz as f64 / 2.0);
    let bank = mel_filterbank(d_freq, cfg.n_filters, sample_rate_hz, cfg.mel_low_hz, high)?;
    let mut aff = aff_init_mfcc(&bank, d_freq, cfg.n_filters)?;
    aff.trim_halfwidth_bins = cfg.trim_halfwidth_bins;
    aff.trim_period_epochs = cfg.trim_period_epochs;
    let encoder = SeqEncoder::build(cfg.encoder, cfg.n_filters, cfg.d_ff, seed);
    let head = DenseNet3::new(cfg.n_filters, cfg.hidden, seed);
    let mut model = AffModel::new(aff, encoder, head)?;
    let tc = TrainConfig { seed, ..cfg.train };
    let training = train(&mut model, &train_x, &train_y, &tc)?;
    let metrics = evaluate(&model, &test_x, &test_y)?;
    let curve = importance_curve(&model.aff)?;
    let peak_bin = crate::nn::first_argmax(&curve);
    let n_fft = 2 * (d_freq - 1);
    Ok(AffTaskResult {
        task,
        seed,
        peak_hz: peak_bin as f64 * sample_rate_hz as f64 / n_fft as f64,
        peak_bin,
        curve,
        metrics,
        training,
        split,
        model,
    })
}

/// A task whose AFF training failed; the rest of the report still stands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffFailure {
    pub task: Task,
    pub reason: String,
}

/// Per-task results plus the cross-task mean and spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffReport {
    pub config: AffConfig,
    pub bin_hz: f64,
    pub tasks: Vec<AffTaskResult>,
    pub failures: Vec<AffFailure>,
    pub aggregate: ImportanceAggregate,
    pub peak_hz: f64,
}

/// Trains every task in parallel. Fails only when no task succeeds.
pub fn analyze_aff(cohort: &Cohort<Matrix>, tasks: &[Task], sample_rate_hz: u32, cfg: &AffConfig, seed: u64) -> Result<AffReport> {
    let outcomes: Vec<(Task, Result<AffTaskResult>)> = tasks
        .par_iter()
        .map(|&t| (t, train_aff_task(cohort, t, sample_rate_hz, cfg, seed)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut last_err = None;
    for (task, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                log::warn!("AFF training for {task} failed: {e}");
                failures.push(AffFailure { task, reason: e.to_string() });
                last_err = Some(e);
            }
        }
    }
    if results.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Config("no tasks requested".into())));
    }
    let curves: Vec<Vec<f64>> = results.iter().map(|r| r.curve.clone()).collect();
    let aggregate = aggregate_curves(&curves)?;
    let d_freq = aggregate.mean.len();
    let bin_hz = sample_rate_hz as f64 / (2 * (d_freq - 1)) as f64;
    let peak_hz = crate::nn::first_argmax(&aggregate.mean) as f64 * bin_hz;
    Ok(AffReport {
        config: cfg.clone(),
        bin_hz,
        tasks: results,
        failures,
        aggregate,
        peak_hz,
    })
}

impl AffReport {
    /// `bin_hz,<task>...,mean,std`, one row per frequency bin.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("bin_hz");
        for t in &self.tasks {
            let _ = write!(out, ",{}", t.task);
        }
        out.push_str(",mean,std\n");
        for f in 0..self.aggregate.mean.len() {
            let _ = write!(out, "{}", f as f64 * self.bin_hz);
            for t in &self.tasks {
                let _ = write!(out, ",{}", t.curve[f]);
            }
            let _ = writeln!(out, ",{},{}", self.aggregate.mean[f], self.aggregate.std[f]);
        }
        out
    }

    /// Self-contained SVG line plot of each task curve, the mean and a ±std
    /// band, with the peak of the mean annotated.
    pub fn svg(&self) -> String {
        let (w, h) = (800.0, 420.0);
        let (left, right, top, bottom) = (60.0, 20.0, 30.0, 50.0);
        let n = self.aggregate.mean.len();
        let max_hz = (n - 1) as f64 * self.bin_hz;
        let x = |f: usize| left + (w - left - right) * f as f64 * self.bin_hz / max_hz;
        let y = |v: f64| top + (h - top - bottom) * (1.0 - v.clamp(0.0, 1.2) / 1.2);
        let path = |vals: &[f64]| {
            let mut d = String::new();
            for (f, &v) in vals.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if f == 0 { "M" } else { "L" }, x(f), y(v));
            }
            d
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let mut band = String::new();
        for f in 0..n {
            let _ = write!(band, "{}{:.2},{:.2} ", if f == 0 { "M" } else { "L" }, x(f), y(self.aggregate.mean[f] + self.aggregate.std[f]));
        }
        for f in (0..n).rev() {
            let _ = write!(band, "L{:.2},{:.2} ", x(f), y(self.aggregate.mean[f] - self.aggregate.std[f]));
        }
        let _ = writeln!(s, r##"<path d="{band}Z" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##);
        let colours = ["#e6550d", "#31a354", "#756bb1", "#636363", "#d6616b", "#8c6d31"];
        for (i, t) in self.tasks.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="0.8" opacity="0.7"><title>{}</title></path>"#,
                path(&t.curve),
                colours[i % colours.len()],
                t.task
            );
        }
        let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#08519c" stroke-width="2"><title>mean</title></path>"##, path(&self.aggregate.mean));
        let (x0, y0, x1, y1) = (left, h - bottom, w - right, top);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
        let step = if max_hz > 6000.0 { 2000.0 } else { 1000.0 };
        let mut tick = 0.0;
        while tick <= max_hz {
            let tx = left + (w - left - right) * tick / max_hz;
            let _ = writeln!(s, r#"<line x1="{tx:.2}" y1="{y0}" x2="{tx:.2}" y2="{}" stroke="black"/><text x="{tx:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 5.0, y0 + 18.0, tick);
            tick += step;
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">frequency (Hz)</text>"#, (x0 + x1) / 2.0, h - 10.0);
        let _ = writeln!(s, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">importance</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0);
        let peak = crate::nn::first_argmax(&self.aggregate.mean);
        let (px, py) = (x(peak), y(self.aggregate.mean[peak]));
        let _ = writeln!(
            s,
            r##"<g id="peak" data-peak-hz="{:.1}"><circle cx="{px:.2}" cy="{py:.2}" r="4" fill="#a50f15"/><text x="{:.2}" y="{:.2}" fill="#a50f15">peak {:.0} Hz</text></g>"##,
            self.peak_hz,
            px + 6.0,
            (py - 6.0).max(12.0),
            self.peak_hz
        );
        s.push_str("</svg>\n");
        s
    }
}
