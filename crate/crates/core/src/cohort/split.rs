use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::seeded_rng;
use crate::types::Sex;

use super::Cohort;

pub const DEFAULT_TEST_RATIO: f64 = 0.3;

/// Patient-level train/test assignment. Every recording of a patient lands on
/// the same side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratio: f64,
}

impl SplitPlan {
    /// Fails if a patient appears on both sides.
    pub fn check_disjoint(&self) -> Result<()> {
        let train: BTreeSet<&str> = self.train.iter().map(String::as_str).collect();
        if let Some(p) = self.test.iter().find(|p| train.contains(p.as_str())) {
            return Err(Error::Config(format!("patient {p} is in both train and test")));
        }
        Ok(())
    }

    pub fn is_train(&self, patient_id: &str) -> bool {
        self.train.iter().any(|p| p == patient_id)
    }

    pub fn is_test(&self, patient_id: &str) -> bool {
        self.test.iter().any(|p| p == patient_id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: SplitPlan = serde_json::from_str(s)?;
        plan.check_disjoint()?;
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Seeded, sex-stratified patient split. The test side gets
/// `round(n * ratio)` patients (at least one, leaving at least one for
/// training), shared between sexes by largest remainder.
pub fn split_by_patient<T>(cohort: &Cohort<T>, test_ratio: f64, seed: u64) -> Result<SplitPlan> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::Config(format!("test ratio {test_ratio} outside (0, 1)")));
    }
    let n = cohort.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} patients cannot be split")));
    }
    let n_test = ((n as f64 * test_ratio).round() as usize).clamp(1, n - 1);

    let strata: Vec<Vec<&str>> = [Sex::Female, Sex::Male]
        .iter()
        .map(|&s| {
            let mut ids: Vec<&str> = cohort
                .patients()
                .iter()
                .filter(|p| p.sex == s)
                .map(|p| p.patient_id.as_str())
                .collect();
            ids.sort_unstable();
            ids
        })
        .collect();

    let exact: Vec<f64> = strata.iter().map(|s| s.len() as f64 * n_test as f64 / n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut left = n_test - quota.iter().sum::<usize>();
    for &i in order.iter().cycle().take(2 * strata.len()) {
        if left == 0 {
            break;
        }
        if quota[i] < strata[i].len() {
            quota[i] += 1;
            left -= 1;
        }
    }

    let mut rng = seeded_rng(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (ids, &k) in strata.iter().zip(&quota) {
        let mut ids = ids.clone();
        ids.shuffle(&mut rng);
        test.extend(ids[..k].iter().map(|s| s.to_string()));
        train.extend(ids[k..].iter().map(|s| s.to_string()));
    }
    train.sort();
    test.sort();
    let plan = SplitPlan { train, test, seed, ratio: test_ratio };
    plan.check_disjoint()?;
    Ok(plan)
}
