use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{build_pairwise, build_patientwise, split_by_patient, Cohort, SplitPlan, TrainTest};
use crate::error::{Error, Result};
use crate::features::{ExtractionParams, FeatureVector};
use crate::nn::{evaluate, train, DenseNet3, Metrics, TrainConfig, DEFAULT_HIDDEN};
use crate::stats::{select_features, SelectionMask, SelectionReport, TestKind, DEFAULT_ALPHA};
use crate::types::{Group, Scheme, Task};

use super::AffConfig;

/// The full experimental grid and every hyperparameter needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub tasks: Vec<Task>,
    pub groups: Vec<Group>,
    pub schemes: Vec<Scheme>,
    pub test_kinds: Vec<TestKind>,
    pub alpha: f64,
    pub test_ratio: f64,
    pub seeds: Vec<u64>,
    pub hidden: (usize, usize),
    /// `seed` is replaced per cell.
    pub train: TrainConfig,
    pub extraction: ExtractionParams,
    pub aff: AffConfig,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            manifest: PathBuf::from("manifest.csv"),
            tasks: Task::ALL.to_vec(),
            groups: Group::ALL.to_vec(),
            schemes: Scheme::ALL.to_vec(),
            test_kinds: vec![TestKind::Independent, TestKind::Paired],
            alpha: DEFAULT_ALPHA,
            test_ratio: crate::cohort::DEFAULT_TEST_RATIO,
            seeds: vec![0],
            hidden: DEFAULT_HIDDEN,
            train: TrainConfig {
                lr: 1e-3,
                epochs: 100,
                batch_size: 16,
                seed: 0,
                trim: false,
            },
            extraction: ExtractionParams::default(),
            aff: AffConfig::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("tasks", self.tasks.is_empty()),
            ("groups", self.groups.is_empty()),
            ("schemes", self.schemes.is_empty()),
            ("test_kinds", self.test_kinds.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((what, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("{what} must not be empty")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return Err(Error::Config(format!("test ratio {} outside (0, 1)", self.test_ratio)));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 || !(self.train.lr >= 0.0) {
            return Err(Error::Config("training needs epochs > 0, batch_size > 0, lr >= 0".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cells in report order: task, group, scheme, test kind, seed.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &task in &self.tasks {
            for &group in &self.groups {
                for &scheme in &self.schemes {
                    for &kind in &self.test_kinds {
                        for &seed in &self.seeds {
                            out.push(CellKey { task, group, scheme, kind, seed });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub task: Task,
    pub group: Group,
    pub scheme: Scheme,
    #[serde(rename = "test")]
    pub kind: TestKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSuccess {
    pub metrics: Metrics,
    /// F1 as a percentage with one decimal.
    pub f1_pct: f64,
    pub n_selected: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub split: SplitPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok(CellSuccess),
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(flatten)]
    pub key: CellKey,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn f1(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Ok(s) => Some(s.metrics.f1),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Mean F1 over the successful cells of one scheme (and test kind, if given).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub scheme: Scheme,
    #[serde(rename = "test")]
    pub kind: Option<TestKind>,
    pub mean_f1: Option<f64>,
    pub mean_f1_pct: Option<f64>,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub averages: Vec<AverageRow>,
    pub failed_cells: usize,
}

pub fn pct1(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

/// Seed for pair-wise label draws, kept apart from the split's stream.
fn label_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_1abe_1000_0001
}

/// Wet and dry vectors of the given patients for one task. Paired tests only
/// see patients with both recordings.
fn condition_vectors<'a>(
    cohort: &'a Cohort<FeatureVector>,
    task: Task,
    ids: impl IntoIterator<Item = &'a str>,
    kind: TestKind,
) -> (Vec<FeatureVector>, Vec<FeatureVector>) {
    let mut wet = Vec::new();
    let mut dry = Vec::new();
    for id in ids {
        let Some(rec) = cohort.get(id).and_then(|p| p.task(task)) else { continue };
        if kind == TestKind::Paired && !rec.is_complete() {
            continue;
        }
        wet.extend(rec.wet.clone());
        dry.extend(rec.dry.clone());
    }
    (wet, dry)
}

/// Feature selection for one task and group over the given patients.
pub fn select_for(
    cohort: &Cohort<FeatureVector>,
    task: Task,
    group: Group,
    ids: Option<&[String]>,
    kind: TestKind,
    alpha: f64,
) -> Result<SelectionMask> {
    let sub = cohort.filter_group(group);
    let all: Vec<String> = sub.patient_ids().iter().map(|s| s.to_string()).collect();
    let ids = ids.unwrap_or(&all);
    let in_group: Vec<&str> = ids.iter().map(String::as_str).filter(|id| sub.get(id).is_some()).collect();
    let (wet, dry) = condition_vectors(&sub, task, in_group, kind);
    select_features(&wet, &dry, kind, alpha)
}

/// One selection outcome of [`selection_table`].
pub type CellMask = (Task, Group, TestKind, Result<SelectionMask>);

/// Counts of selected features for every task, group and test kind.
pub fn selection_table(
    cohort: &Cohort<FeatureVector>,
    feature_set: &str,
    tasks: &[Task],
    groups: &[Group],
    kinds: &[TestKind],
    alpha: f64,
) -> (SelectionReport, Vec<CellMask>) {
    let mut jobs = Vec::new();
    for &g in groups {
        for &k in kinds {
            for &t in tasks {
                jobs.push((t, g, k));
            }
        }
    }
    let masks: Vec<_> = jobs
        .into_par_iter()
        .map(|(t, g, k)| (t, g, k, select_for(cohort, t, g, None, k, alpha)))
        .collect();
    let mut report = SelectionReport::new(tasks);
    for (t, g, k, m) in &masks {
        report.record(feature_set, *g, *k, *t, m.as_ref().ok().map(SelectionMask::count));
    }
    (report, masks)
}

/// Selection on training patients, dataset build, training and test metrics for one cell.
pub fn run_cell(cohort: &Cohort<FeatureVector>, cfg: &ExperimentConfig, key: CellKey) -> Result<CellSuccess> {
    let sub = cohort.filter_group(key.group).for_task(key.task);
    let sub = match key.scheme {
        Scheme::PairWise => sub.complete_for(key.task),
        Scheme::PatientWise => sub,
    };
    let split = split_by_patient(&sub, cfg.test_ratio, key.seed)?;
    let mask = select_for(&sub, key.task, key.group, Some(&split.train), key.kind, cfg.alpha)?;
    if mask.count() == 0 {
        return Err(Error::InsufficientData("no feature passed selection".into()));
    }
    let data: TrainTest = match key.scheme {
        Scheme::PatientWise => build_patientwise(&sub, key.task, &split, &mask, key.group)?,
        Scheme::PairWise => build_pairwise(&sub, key.task, &split, &mask, label_seed(key.seed))?.into_datasets(),
    };
    let mut net = DenseNet3::new(data.train.dim(), cfg.hidden, key.seed);
    let tc = TrainConfig { seed: key.seed, trim: false, ..cfg.train };
    train(&mut net, &data.train.x, &data.train.y, &tc)?;
    let metrics = evaluate(&net, &data.test.x, &data.test.y)?;
    Ok(CellSuccess {
        f1_pct: pct1(metrics.f1),
        metrics,
        n_selected: mask.count(),
        n_train: data.train.len(),
        n_test: data.test.len(),
        split,
    })
}

/// Runs every cell in parallel; results keep grid order, failures are recorded.
pub fn run_grid(cohort: &Cohort<FeatureVector>, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells: Vec<CellResult> = cfg
        .cells()
        .into_par_iter()
        .map(|key| {
            let outcome = match run_cell(cohort, cfg, key) {
                Ok(s) => CellOutcome::Ok(s),
                Err(e) => {
                    log::warn!("cell {}/{}/{}/{}/seed {} failed: {e}", key.task, key.group, key.scheme, key.kind, key.seed);
                    CellOutcome::Failed { reason: e.to_string() }
                }
            };
            CellResult { key, outcome }
        })
        .collect();
    let mut averages = Vec::new();
    for &scheme in &cfg.schemes {
        for kind in cfg.test_kinds.iter().map(|&k| Some(k)).chain([None]) {
            let f1s: Vec<f64> = cells
                .iter()
                .filter(|c| c.key.scheme == scheme && kind.is_none_or(|k| c.key.kind == k))
                .filter_map(CellResult::f1)
                .collect();
            let mean = (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64);
            averages.push(AverageRow {
                scheme,
                kind,
                mean_f1: mean,
                mean_f1_pct: mean.map(pct1),
                n_cells: f1s.len(),
            });
        }
    }
    let failed_cells = cells.iter().filter(|c| c.f1().is_none()).count();
    Ok(ExperimentReport {
        config: cfg.clone(),
        cells,
        averages,
        failed_cells,
    })
}

impl ExperimentReport {
    /// Mean F1 (fraction) over every successful cell of `scheme`.
    pub fn average_f1(&self, scheme: Scheme) -> Option<f64> {
        self.averages
            .iter()
            .find(|a| a.scheme == scheme && a.kind.is_none())
            .and_then(|a| a.mean_f1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per cell followed by the average rows; F1 in percent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,sex,scheme,test,seed,status,f1_pct,precision,recall,accuracy,n_selected,n_train,n_test,reason\n");
        for c in &self.cells {
            let k = &c.key;
            let _ = write!(out, "{},{},{},{},{},", k.task, k.group, k.scheme, k.kind, k.seed);
            match &c.outcome {
                CellOutcome::Ok(s) => {
                    let m = &s.metrics;
                    let _ = writeln!(
                        out,
                        "ok,{:.1},{:.4},{:.4},{:.4},{},{},{},",
                        s.f1_pct, m.precision, m.recall, m.accuracy, s.n_selected, s.n_train, s.n_test
                    );
                }
                CellOutcome::Failed { reason } => {
                    let _ = writeln!(out, "failed,,,,,,,,\"{}\"", reason.replace('"', "'"));
                }
            }
        }
        for a in &self.averages {
            let kind = a.kind.map_or("all".to_string(), |k| k.to_string());
            let pct = a.mean_f1_pct.map_or(String::new(), |p| format!("{p:.1}"));
            let _ = writeln!(out, "average,all,{},{kind},,{},{pct},,,,,,,", a.scheme, if a.mean_f1.is_some() { "ok" } else { "failed" });
        }
        out
    }
}
