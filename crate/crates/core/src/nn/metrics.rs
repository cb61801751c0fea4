use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::Model;

/// Binary classification scores with wet (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    /// False when precision + recall = 0 and F1 was set to 0 by convention.
    pub f1_defined: bool,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1_defined = precision + recall > 0.0;
        let f1 = if f1_defined {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            tp,
            fp,
            fn_,
            tn,
            f1_defined,
        }
    }

    /// Scores hard predictions against labels.
    pub fn from_predictions(predicted: &[usize], labels: &[usize]) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p, y) {
                (1, 1) => tp += 1,
                (1, _) => fp += 1,
                (_, 1) => fn_ += 1,
                _ => tn += 1,
            }
        }
        Metrics::from_counts(tp, fp, fn_, tn)
    }
}

/// Predicted class: positive when `p(wet) ≥ 0.5`.
pub fn decide(proba: [f64; 2]) -> usize {
    usize::from(proba[1] >= 0.5)
}

pub fn evaluate<M: Model>(model: &M, inputs: &[M::Input], labels: &[usize]) -> Result<Metrics> {
    if inputs.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!("{} inputs, {} labels", inputs.len(), labels.len())));
    }
    let refs: Vec<&M::Input> = inputs.iter().collect();
    let predicted: Vec<usize> = model.predict_proba(&refs)?.into_iter().map(decide).collect();
    let m = Metrics::from_predictions(&predicted, labels);
    if !m.f1_defined {
        log::warn!("precision and recall are both zero; F1 reported as 0");
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_example() {
        let m = Metrics::from_counts(3, 1, 1, 0);
        assert_eq!((m.precision, m.recall, m.f1), (0.75, 0.75, 0.75));
    }

    #[test]
    fn perfect_predictions() {
        let y = [1, 0, 1, 1, 0];
        let m = Metrics::from_predictions(&y, &y);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn all_positive_on_balanced_ten() {
        let y = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let m = Metrics::from_predictions(&[1; 10], &y);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_positive_predictions_gives_flagged_zero() {
        let m = Metrics::from_predictions(&[0, 0, 0], &[1, 0, 1]);
        assert_eq!(m.f1, 0.0);
        assert!(!m.f1_defined);
    }
}
