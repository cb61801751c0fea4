//! Cohort data model, manifest ingestion, speaker-independent splits and the
//! patient-wise / pair-wise dataset builders.

mod dataset;
mod manifest;
mod split;

pub use dataset::{
    build_pairwise, build_patientwise, pair_vector, Dataset, PairSample, PairSets, TrainTest,
};
pub use manifest::{attach_features, load_manifest, parse_manifest, write_manifest, ManifestEntry};
pub use split::{split_by_patient, SplitPlan, DEFAULT_TEST_RATIO};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Condition, Group, Sex, Task};

/// Wet and dry recordings of one task; either may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecordings<T> {
    pub wet: Option<T>,
    pub dry: Option<T>,
}

impl<T> Default for TaskRecordings<T> {
    fn default() -> Self {
        TaskRecordings { wet: None, dry: None }
    }
}

impl<T> TaskRecordings<T> {
    pub fn get(&self, c: Condition) -> Option<&T> {
        match c {
            Condition::Wet => self.wet.as_ref(),
            Condition::Dry => self.dry.as_ref(),
        }
    }

    pub fn slot(&mut self, c: Condition) -> &mut Option<T> {
        match c {
            Condition::Wet => &mut self.wet,
            Condition::Dry => &mut self.dry,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.wet.is_some() && self.dry.is_some()
    }

    pub fn pair(&self) -> Option<(&T, &T)> {
        Some((self.wet.as_ref()?, self.dry.as_ref()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord<T> {
    pub patient_id: String,
    pub sex: Sex,
    pub tasks: BTreeMap<Task, TaskRecordings<T>>,
}

impl<T> PatientRecord<T> {
    pub fn task(&self, task: Task) -> Option<&TaskRecordings<T>> {
        self.tasks.get(&task)
    }

    /// Both conditions are present for `task`.
    pub fn is_complete(&self, task: Task) -> bool {
        self.task(task).is_some_and(TaskRecordings::is_complete)
    }
}

/// Patients ordered by id. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort<T> {
    patients: Vec<PatientRecord<T>>,
}

impl<T> Cohort<T> {
    pub fn new(mut patients: Vec<PatientRecord<T>>) -> Result<Self> {
        patients.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
        if let Some(w) = patients.windows(2).find(|w| w[0].patient_id == w[1].patient_id) {
            return Err(Error::Duplicate(format!("patient {}", w[0].patient_id)));
        }
        Ok(Cohort { patients })
    }

    pub fn patients(&self) -> &[PatientRecord<T>] {
        &self.patients
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn get(&self, patient_id: &str) -> Option<&PatientRecord<T>> {
        self.patients
            .binary_search_by(|p| p.patient_id.as_str().cmp(patient_id))
            .ok()
            .map(|i| &self.patients[i])
    }

    pub fn patient_ids(&self) -> Vec<&str> {
        self.patients.iter().map(|p| p.patient_id.as_str()).collect()
    }

    /// Tasks recorded for at least one patient.
    pub fn tasks(&self) -> Vec<Task> {
        let mut t: Vec<Task> = self.patients.iter().flat_map(|p| p.tasks.keys().copied()).collect();
        t.sort();
        t.dedup();
        t
    }

    /// Patients with both conditions for `task`.
    pub fn pairwise_eligible(&self, task: Task) -> Vec<&PatientRecord<T>> {
        self.patients.iter().filter(|p| p.is_complete(task)).collect()
    }

    /// Patients with at least one but not both conditions for `task`.
    pub fn incomplete(&self, task: Task) -> Vec<&PatientRecord<T>> {
        self.patients
            .iter()
            .filter(|p| p.task(task).is_some_and(|r| !r.is_complete()))
            .collect()
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Cohort<U> {
        Cohort {
            patients: self
                .patients
                .into_iter()
                .map(|p| PatientRecord {
                    patient_id: p.patient_id,
                    sex: p.sex,
                    tasks: p
                        .tasks
                        .into_iter()
                        .map(|(t, r)| {
                            (
                                t,
                                TaskRecordings {
                                    wet: r.wet.map(&mut f),
                                    dry: r.dry.map(&mut f),
                                },
                            )
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl<T: Clone> Cohort<T> {
    /// Patients of the given sex; `Group::All` keeps everyone.
    pub fn filter_group(&self, group: Group) -> Cohort<T> {
        Cohort {
            patients: self.patients.iter().filter(|p| group.admits(p.sex)).cloned().collect(),
        }
    }

    /// Patients that have at least one recording of `task`, with only that task kept.
    pub fn for_task(&self, task: Task) -> Cohort<T> {
        Cohort {
            patients: self
                .patients
                .iter()
                .filter_map(|p| {
                    let r = p.task(task)?;
                    (r.wet.is_some() || r.dry.is_some()).then(|| PatientRecord {
                        patient_id: p.patient_id.clone(),
                        sex: p.sex,
                        tasks: BTreeMap::from([(task, r.clone())]),
                    })
                })
                .collect(),
        }
    }

    /// Only patients with both conditions for `task`.
    pub fn complete_for(&self, task: Task) -> Cohort<T> {
        Cohort {
            patients: self.patients.iter().filter(|p| p.is_complete(task)).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient(id: &str, sex: Sex) -> PatientRecord<u32> {
        PatientRecord {
            patient_id: id.into(),
            sex,
            tasks: BTreeMap::from([(Task::Pg, TaskRecordings { wet: Some(1), dry: Some(0) })]),
        }
    }

    fn cohort() -> Cohort<u32> {
        Cohort::new(vec![
            patient("a", Sex::Female),
            patient("b", Sex::Male),
            patient("c", Sex::Female),
            patient("d", Sex::Male),
            patient("e", Sex::Female),
        ])
        .unwrap()
    }

    #[test]
    fn group_filters_partition_the_cohort() {
        let c = cohort();
        assert_eq!(c.filter_group(Group::Male).len(), 2);
        assert_eq!(c.filter_group(Group::All), c);
        let (f, m) = (c.filter_group(Group::Female), c.filter_group(Group::Male));
        let mut union: Vec<&str> = f
            .patients()
            .iter()
            .chain(m.patients())
            .map(|p| p.patient_id.as_str())
            .collect();
        union.sort();
        assert_eq!(union, c.patient_ids());
    }

    #[test]
    fn duplicate_patients_rejected() {
        let r = Cohort::new(vec![patient("a", Sex::Male), patient("a", Sex::Male)]);
        assert!(matches!(r, Err(Error::Duplicate(_))));
    }
}
