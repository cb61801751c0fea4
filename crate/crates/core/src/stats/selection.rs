use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ensure_common_names, FeatureVector};
use crate::types::{Group, Task};

use super::{independent_ttest, paired_ttest, TestKind};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Per-feature outcome of a wet-vs-dry t-test screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub names: Vec<String>,
    pub selected: Vec<bool>,
    /// `None` for features whose test was degenerate.
    pub p_values: Vec<Option<f64>>,
    pub alpha: f64,
    pub kind: TestKind,
    pub degenerate: usize,
}

impl SelectionMask {
    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.names
            .iter()
            .zip(&self.selected)
            .filter(|(_, &s)| s)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        (0..self.selected.len()).filter(|&i| self.selected[i]).collect()
    }

    /// Mask file format: JSON list of selected feature names.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.selected_names())?)
    }

    /// Rebuilds a mask over `names` from a list of selected names.
    pub fn from_selected_names(names: &[String], selected: &[String], kind: TestKind, alpha: f64) -> Result<Self> {
        let wanted: BTreeSet<&str> = selected.iter().map(String::as_str).collect();
        if let Some(missing) = wanted.iter().find(|n| !names.iter().any(|m| m == *n)) {
            return Err(Error::Schema(format!("selected feature {missing:?} is not in the table")));
        }
        Ok(SelectionMask {
            names: names.to_vec(),
            selected: names.iter().map(|n| wanted.contains(n.as_str())).collect(),
            p_values: vec![None; names.len()],
            alpha,
            kind,
            degenerate: 0,
        })
    }
}

fn by_patient<'a>(vectors: &'a [FeatureVector], side: &str) -> Result<BTreeMap<&'a str, &'a FeatureVector>> {
    let mut map = BTreeMap::new();
    for v in vectors {
        let id = v
            .recording()
            .map(|r| r.patient_id.as_str())
            .ok_or_else(|| Error::Alignment(format!("{side} vector without patient id")))?;
        if map.insert(id, v).is_some() {
            return Err(Error::Alignment(format!("patient {id} appears twice among {side} vectors")));
        }
    }
    Ok(map)
}

/// Screens every feature with a wet-vs-dry t-test and keeps those with `p ≤ alpha`.
/// Degenerate (zero-variance) features are left unselected and counted.
pub fn select_features(
    wet: &[FeatureVector],
    dry: &[FeatureVector],
    kind: TestKind,
    alpha: f64,
) -> Result<SelectionMask> {
    let all: Vec<FeatureVector> = wet.iter().chain(dry).cloned().collect();
    ensure_common_names(&all)?;
    let names = match all.first() {
        Some(v) => v.names().to_vec(),
        None => return Err(Error::InsufficientData("no feature vectors".into())),
    };
    let (wet_rows, dry_rows): (Vec<&FeatureVector>, Vec<&FeatureVector>) = match kind {
        TestKind::Paired => {
            let w = by_patient(wet, "wet")?;
            let d = by_patient(dry, "dry")?;
            if !w.keys().eq(d.keys()) {
                let only_wet: Vec<_> = w.keys().filter(|k| !d.contains_key(*k)).collect();
                let only_dry: Vec<_> = d.keys().filter(|k| !w.contains_key(*k)).collect();
                return Err(Error::Alignment(format!(
                    "wet-only patients {only_wet:?}, dry-only patients {only_dry:?}"
                )));
            }
            (w.into_values().collect(), d.into_values().collect())
        }
        TestKind::Independent => (wet.iter().collect(), dry.iter().collect()),
    };
    let mut selected = Vec::with_capacity(names.len());
    let mut p_values = Vec::with_capacity(names.len());
    let mut degenerate = 0;
    for j in 0..names.len() {
        let x: Vec<f64> = wet_rows.iter().map(|v| v.values()[j]).collect();
        let y: Vec<f64> = dry_rows.iter().map(|v| v.values()[j]).collect();
        let test = match kind {
            TestKind::Paired => paired_ttest(&x, &y),
            TestKind::Independent => independent_ttest(&x, &y),
        };
        match test {
            Ok(r) => {
                selected.push(r.p_two_sided <= alpha);
                p_values.push(Some(r.p_two_sided));
            }
            Err(Error::Degenerate(_)) => {
                degenerate += 1;
                selected.push(false);
                p_values.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} of {} features were degenerate and left unselected", names.len());
    }
    Ok(SelectionMask {
        names,
        selected,
        p_values,
        alpha,
        kind,
        degenerate,
    })
}

/// One row of the selection table: a feature set, sex group and test kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub feature_set: String,
    pub group: Group,
    pub kind: TestKind,
    pub counts: BTreeMap<Task, Option<usize>>,
}

/// Selected-feature counts laid out as feature set × sex × test kind rows and task columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionReport {
    pub tasks: Vec<Task>,
    pub rows: Vec<SelectionRow>,
}

fn group_rank(g: Group) -> usize {
    match g {
        Group::Male => 0,
        Group::Female => 1,
        Group::All => 2,
    }
}

impl SelectionReport {
    pub fn new(tasks: &[Task]) -> Self {
        SelectionReport {
            tasks: tasks.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Records a cell; `None` marks a group with no data for that task.
    pub fn record(&mut self, feature_set: &str, group: Group, kind: TestKind, task: Task, count: Option<usize>) {
        if !self.tasks.contains(&task) {
            self.tasks.push(task);
            self.tasks.sort();
        }
        let idx = match self
            .rows
            .iter()
            .position(|r| r.feature_set == feature_set && r.group == group && r.kind == kind)
        {
            Some(i) => i,
            None => {
                self.rows.push(SelectionRow {
                    feature_set: feature_set.to_string(),
                    group,
                    kind,
                    counts: BTreeMap::new(),
                });
                self.rows.sort_by(|a, b| {
                    (a.feature_set.as_str(), group_rank(a.group), a.kind)
                        .cmp(&(b.feature_set.as_str(), group_rank(b.group), b.kind))
                });
                self.rows
                    .iter()
                    .position(|r| r.feature_set == feature_set && r.group == group && r.kind == kind)
                    .expect("row just inserted")
            }
        };
        self.rows[idx].counts.insert(task, count);
    }

    pub fn cell(&self, feature_set: &str, group: Group, kind: TestKind, task: Task) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.feature_set == feature_set && r.group == group && r.kind == kind)
            .and_then(|r| r.counts.get(&task).copied().flatten())
    }

    fn render_cell(row: &SelectionRow, task: Task) -> String {
        match row.counts.get(&task).copied().flatten() {
            Some(c) => c.to_string(),
            None => "-".into(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_set,sex,test");
        for t in &self.tasks {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{}", row.feature_set, group_label(row.group), row.kind);
            for &t in &self.tasks {
                let _ = write!(out, ",{}", Self::render_cell(row, t));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn group_label(g: Group) -> &'static str {
    match g {
        Group::Male => "male",
        Group::Female => "female",
        Group::All => "all",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Condition, RecordingRef};

    fn fv(patient: &str, cond: Condition, values: Vec<f64>) -> FeatureVector {
        let names = (0..values.len()).map(|i| format!("f{i}")).collect();
        FeatureVector::new(names, values).unwrap().with_recording(RecordingRef {
            patient_id: patient.into(),
            task: Task::Pg,
            condition: cond,
        })
    }

    #[test]
    fn identical_conditions_select_nothing() {
        let wet: Vec<_> = (0..10).map(|i| fv(&format!("p{i}"), Condition::Wet, vec![i as f64, 1.0])).collect();
        let dry: Vec<_> = (0..10).map(|i| fv(&format!("p{i}"), Condition::Dry, vec![i as f64, 1.0])).collect();
        for kind in [TestKind::Paired, TestKind::Independent] {
            let m = select_features(&wet, &dry, kind, 0.05).unwrap();
            assert_eq!(m.count(), 0);
        }
        let paired = select_features(&wet, &dry, TestKind::Paired, 0.05).unwrap();
        assert_eq!(paired.degenerate, 2);
    }

    #[test]
    fn misaligned_patients_rejected() {
        let wet = vec![fv("a", Condition::Wet, vec![1.0]), fv("b", Condition::Wet, vec![2.0])];
        let dry = vec![fv("a", Condition::Dry, vec![1.5]), fv("c", Condition::Dry, vec![2.5])];
        assert!(matches!(
            select_features(&wet, &dry, TestKind::Paired, 0.05),
            Err(Error::Alignment(_))
        ));
        assert!(select_features(&wet, &dry, TestKind::Independent, 0.05).is_ok());
    }

    #[test]
    fn report_layout() {
        let mut r = SelectionReport::new(&[Task::Pg, Task::Mm]);
        r.record("A", Group::All, TestKind::Paired, Task::Pg, Some(3));
        r.record("A", Group::Male, TestKind::Independent, Task::Pg, Some(1));
        r.record("A", Group::All, TestKind::Paired, Task::Mm, None);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "feature_set,sex,test,pg,mm");
        assert_eq!(lines[1], "A,male,ind,1,-");
        assert_eq!(lines[2], "A,all,pair,3,-");
        assert_eq!(r.cell("A", Group::All, TestKind::Paired, Task::Pg), Some(3));
    }

    #[test]
    fn mask_json_lists_selected_names() {
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let m = SelectionMask::from_selected_names(&names, &["c".into()], TestKind::Paired, 0.05).unwrap();
        assert_eq!(m.selected, vec![false, false, true]);
        let json = m.to_json().unwrap();
        let back: Vec<String> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec!["c".to_string()]);
        assert!(SelectionMask::from_selected_names(&names, &["zz".into()], TestKind::Paired, 0.05).is_err());
    }
}
