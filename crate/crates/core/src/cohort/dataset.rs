use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::nn::seeded_rng;
use crate::stats::SelectionMask;
use crate::types::{Condition, Group, Task};

use rand::Rng;

use super::{Cohort, SplitPlan};

/// A flat labelled design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub patient_ids: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

/// Signed wet/dry difference of one patient: `A - B` for label 1, `B - A` for label 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub x: Vec<f64>,
    pub label: usize,
    pub patient_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSets {
    pub train: Vec<PairSample>,
    pub test: Vec<PairSample>,
    pub feature_names: Vec<String>,
}

impl PairSets {
    pub fn into_datasets(self) -> TrainTest {
        let conv = |s: Vec<PairSample>, names: &[String]| {
            let mut d = Dataset {
                x: Vec::with_capacity(s.len()),
                y: Vec::with_capacity(s.len()),
                patient_ids: Vec::with_capacity(s.len()),
                feature_names: names.to_vec(),
            };
            for p in s {
                d.x.push(p.x);
                d.y.push(p.label);
                d.patient_ids.push(p.patient_id);
            }
            d
        };
        TrainTest {
            train: conv(self.train, &self.feature_names),
            test: conv(self.test, &self.feature_names),
        }
    }
}

pub fn pair_vector(wet: &[f64], dry: &[f64], label: usize) -> Vec<f64> {
    if label == 1 {
        wet.iter().zip(dry).map(|(a, b)| a - b).collect()
    } else {
        wet.iter().zip(dry).map(|(a, b)| b - a).collect()
    }
}

fn mask_indices(mask: &SelectionMask, v: &FeatureVector) -> Result<Vec<usize>> {
    if mask.names != v.names() {
        return Err(Error::Schema("selection mask does not match the cohort's feature names".into()));
    }
    let idx = mask.selected_indices();
    if idx.is_empty() {
        return Err(Error::InsufficientData("no features selected".into()));
    }
    Ok(idx)
}

fn first_vector(cohort: &Cohort<FeatureVector>, task: Task) -> Option<&FeatureVector> {
    cohort
        .patients()
        .iter()
        .filter_map(|p| p.task(task))
        .find_map(|r| r.wet.as_ref().or(r.dry.as_ref()))
}

fn pick(v: &FeatureVector, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&j| v.values()[j]).collect()
}

/// Every recording of `task` is a standalone point (wet = 1, dry = 0).
/// Selected features are z-scored with training-set statistics; a constant
/// training column is only centred.
pub fn build_patientwise(
    cohort: &Cohort<FeatureVector>,
    task: Task,
    split: &SplitPlan,
    selection: &SelectionMask,
    group: Group,
) -> Result<TrainTest> {
    split.check_disjoint()?;
    let cohort = cohort.filter_group(group);
    let proto = first_vector(&cohort, task)
        .ok_or_else(|| Error::InsufficientData(format!("no {task} recordings for group {group}")))?;
    let idx = mask_indices(selection, proto)?;
    let names: Vec<String> = idx.iter().map(|&j| selection.names[j].clone()).collect();
    let empty = || Dataset {
        x: Vec::new(),
        y: Vec::new(),
        patient_ids: Vec::new(),
        feature_names: names.clone(),
    };
    let (mut train, mut test) = (empty(), empty());
    for p in cohort.patients() {
        let side = if split.is_train(&p.patient_id) {
            &mut train
        } else if split.is_test(&p.patient_id) {
            &mut test
        } else {
            continue;
        };
        let Some(rec) = p.task(task) else { continue };
        for cond in [Condition::Wet, Condition::Dry] {
            if let Some(v) = rec.get(cond) {
                if v.names() != selection.names {
                    return Err(Error::Schema(format!("patient {} has a different feature set", p.patient_id)));
                }
                side.x.push(pick(v, &idx));
                side.y.push(cond.label());
                side.patient_ids.push(p.patient_id.clone());
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InsufficientData(format!(
            "group {group}, task {task}: {} train / {} test points",
            train.len(),
            test.len()
        )));
    }
    let d = names.len();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for row in &train.x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; d];
    for row in &train.x {
        for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for row in train.x.iter_mut().chain(test.x.iter_mut()) {
        for ((v, m), s) in row.iter_mut().zip(&mean).zip(&std) {
            *v = (*v - m) / s;
        }
    }
    Ok(TrainTest { train, test })
}

/// One pair sample per patient with both conditions of `task`. Labels are
/// drawn once from a generator seeded with `seed`, in patient-id order over
/// the training then test side.
pub fn build_pairwise(
    cohort: &Cohort<FeatureVector>,
    task: Task,
    split: &SplitPlan,
    selection: &SelectionMask,
    seed: u64,
) -> Result<PairSets> {
    split.check_disjoint()?;
    let eligible = cohort.pairwise_eligible(task);
    let Some(first) = eligible.first() else {
        return Err(Error::InsufficientData(format!("no patient has both conditions of {task}")));
    };
    let proto = first.task(task).and_then(|r| r.wet.as_ref()).expect("eligible patient");
    let idx = mask_indices(selection, proto)?;
    let feature_names: Vec<String> = idx.iter().map(|&j| selection.names[j].clone()).collect();
    let mut rng = seeded_rng(seed);
    let mut sides: [Vec<PairSample>; 2] = [Vec::new(), Vec::new()];
    for (s, ids) in [&split.train, &split.test].into_iter().enumerate() {
        let mut ids: Vec<&String> = ids.iter().collect();
        ids.sort();
        for id in ids {
            let Some((wet, dry)) = cohort.get(id).and_then(|p| p.task(task)).and_then(|r| r.pair()) else {
                continue;
            };
            if wet.names() != selection.names || dry.names() != selection.names {
                return Err(Error::Schema(format!("patient {id} has a different feature set")));
            }
            let label = rng.random_range(0..2usize);
            sides[s].push(PairSample {
                x: pair_vector(&pick(wet, &idx), &pick(dry, &idx), label),
                label,
                patient_id: id.clone(),
            });
        }
    }
    let [train, test] = sides;
    if train.is_empty() || test.is_empty() {
        return Err(Error::InsufficientData(format!(
            "task {task}: {} train / {} test pairs",
            train.len(),
            test.len()
        )));
    }
    Ok(PairSets { train, test, feature_names })
}
