use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::aff::trim_in_place;
use super::model::Model;
use super::optim::Adam;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Trim the AFF (if any) every `trim_period_epochs` and once more at the end.
    pub trim: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            trim: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
    pub trim_events: usize,
    /// AFF columns left empty after the final trim.
    pub empty_filters: Vec<usize>,
}

/// Mini-batch Adam on mean cross-entropy. Deterministic for a given seed.
pub fn train<M: Model>(model: &mut M, inputs: &[M::Input], labels: &[usize], cfg: &TrainConfig) -> Result<TrainReport> {
    if inputs.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!("{} inputs, {} labels", inputs.len(), labels.len())));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = super::seeded_rng(cfg.seed);
    let mut adam = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut trim_events = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&M::Input> = chunk.iter().map(|&i| &inputs[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_grad(&xs, &ys)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            adam.update(&mut model.params_mut(), &grads);
            total += loss;
            batches += 1;
        }
        loss_curve.push(total / batches as f64);
        if cfg.trim {
            if let Some(aff) = model.aff_mut() {
                if aff.trim_period_epochs > 0 && epoch % aff.trim_period_epochs == 0 {
                    trim_in_place(aff);
                    trim_events += 1;
                }
            }
        }
    }
    let mut empty_filters = Vec::new();
    if cfg.trim {
        if let Some(aff) = model.aff_mut() {
            if !cfg.epochs.is_multiple_of(aff.trim_period_epochs.max(1)) || trim_events == 0 {
                trim_in_place(aff);
                trim_events += 1;
            }
            empty_filters = aff.empty_columns();
            if !empty_filters.is_empty() {
                log::warn!("{} AFF filters are empty after trimming", empty_filters.len());
            }
        }
    }
    Ok(TrainReport {
        loss_curve,
        trim_events,
        empty_filters,
    })
}
