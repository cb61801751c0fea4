use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use hfvoice_core::experiment::{
    analyze_aff, extract_manifest, load_audio_cohort, load_feature_cohort, run_grid, selection_table,
    spectrogram_cohort, ExperimentConfig, ExperimentReport, LoadFailure,
};
use hfvoice_core::cohort::{load_manifest, write_manifest, ManifestEntry};
use hfvoice_core::features::save_feature_csv;
use hfvoice_core::nn::save_model;
use hfvoice_core::synth::{gen_feature_cohort, gen_signal_cohort, SynthConfig, SynthMode};
use hfvoice_core::{Cohort, Error, Group, Result, Scheme, Task, TestKind};

/// Voice-based heart-failure analysis on paired admission/discharge recordings.
#[derive(Parser, Debug)]
#[command(name = "hfvoice", version)]
struct Cli {
    /// Overrides the seed(s) in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config (experiment config, or synth config for `synth`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Manifest CSV (patient_id,sex,task,condition,source).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<Task>>,
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<Group>>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Test kinds: pair, ind.
    #[arg(long = "tests", value_delimiter = ',')]
    test_kinds: Option<Vec<TestKind>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract acoustic features for every recording in a manifest.
    Extract(GridArgs),
    /// Count t-test selected features per task, sex group and test kind.
    Select(GridArgs),
    /// Run the classification grid and write report.json / report.csv.
    Run(GridArgs),
    /// Train adaptive frequency filters and plot their importance curves.
    Aff(GridArgs),
    /// Generate a synthetic cohort.
    Synth(SynthArgs),
    /// Re-render report.csv from a report.json.
    Report {
        /// Path to report.json.
        report: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Feature,
    Signal,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    patients: Option<usize>,
    #[arg(long)]
    female_fraction: Option<f64>,
    /// Wet-vs-dry effect size.
    #[arg(long)]
    effect: Option<f64>,
    /// Per-speaker offset scale.
    #[arg(long)]
    confound: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Planted band for signal mode, e.g. `700,900`.
    #[arg(long, value_delimiter = ',')]
    band: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<Task>>,
    #[arg(long)]
    features: Option<usize>,
    /// Clip length in seconds (signal mode).
    #[arg(long)]
    duration: Option<f64>,
}

/// Exit status: success, hard failure, or some cells/recordings failed.
enum Status {
    Ok,
    Partial,
}

fn read_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// The resolved config and whether the task list was given explicitly.
fn experiment_config(cli: &Cli, args: &GridArgs) -> Result<(ExperimentConfig, bool)> {
    let mut explicit_tasks = args.tasks.is_some();
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let raw: serde_json::Value = serde_json::from_str(&text)?;
            explicit_tasks |= raw.get("tasks").is_some();
            let mut cfg: ExperimentConfig = serde_json::from_value(raw)?;
            // a relative manifest in the config is relative to the config file
            if cfg.manifest.is_relative() {
                if let Some(dir) = p.parent() {
                    cfg.manifest = dir.join(&cfg.manifest);
                }
            }
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &args.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(v) = &args.tasks {
        cfg.tasks = v.clone();
    }
    if let Some(v) = &args.groups {
        cfg.groups = v.clone();
    }
    if let Some(v) = &args.schemes {
        cfg.schemes = v.clone();
    }
    if let Some(v) = &args.test_kinds {
        cfg.test_kinds = v.clone();
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
        cfg.aff.train.epochs = e;
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate()?;
    if !cfg.manifest.exists() {
        return Err(Error::Config(format!("manifest {} does not exist", cfg.manifest.display())));
    }
    Ok((cfg, explicit_tasks))
}

/// Without an explicit task list, keep only the tasks the cohort records.
fn restrict_tasks<T>(cfg: &mut ExperimentConfig, explicit: bool, cohort: &Cohort<T>) {
    if !explicit {
        let present = cohort.tasks();
        cfg.tasks.retain(|t| present.contains(t));
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn failures_csv(failures: &[LoadFailure]) -> String {
    let mut out = String::from("source,reason\n");
    for f in failures {
        out.push_str(&format!("{},{:?}\n", f.source.display(), f.reason));
    }
    out
}

fn report_failures(failures: &[LoadFailure]) {
    for f in failures {
        warn!("skipped {}: {}", f.source.display(), f.reason);
    }
}

fn cmd_extract(cli: &Cli, args: &GridArgs) -> Result<Status> {
    let (cfg, _) = experiment_config(cli, args)?;
    let (vectors, failures) = extract_manifest(&cfg.manifest, &cfg.extraction)?;
    report_failures(&failures);
    if vectors.is_empty() && !failures.is_empty() {
        return Err(Error::InsufficientData(format!("all {} recordings failed", failures.len())));
    }
    let dir = out_dir(&cfg)?;
    save_feature_csv(dir.join("features.csv"), &vectors)?;
    // a manifest over the table so `run` and `select` skip re-extraction
    let source = load_manifest(&cfg.manifest)?;
    let entries: Vec<ManifestEntry> = vectors
        .iter()
        .filter_map(|v| v.recording())
        .filter_map(|r| {
            let sex = source.get(&r.patient_id)?.sex;
            Some(ManifestEntry {
                patient_id: r.patient_id.clone(),
                sex,
                task: r.task,
                condition: r.condition,
                source: "features.csv".into(),
            })
        })
        .collect();
    let manifest = dir.join("manifest.csv");
    let file = fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    write_manifest(file, &entries)?;
    let failure_path = dir.join("extract_failures.csv");
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path).map_err(|e| Error::io(&failure_path, e))?;
        }
    } else {
        write(&failure_path, failures_csv(&failures))?;
    }
    println!("extracted {} recordings, {} failed", vectors.len(), failures.len());
    Ok(Status::Ok)
}

fn cmd_select(cli: &Cli, args: &GridArgs) -> Result<Status> {
    let (mut cfg, explicit) = experiment_config(cli, args)?;
    let (cohort, failures) = load_feature_cohort(&cfg.manifest, &cfg.extraction)?;
    report_failures(&failures);
    restrict_tasks(&mut cfg, explicit, &cohort);
    let (table, masks) = selection_table(&cohort, "features", &cfg.tasks, &cfg.groups, &cfg.test_kinds, cfg.alpha);
    for (t, g, k, m) in &masks {
        if let Err(e) = m {
            warn!("selection {t}/{g}/{k} failed: {e}");
        }
    }
    let dir = out_dir(&cfg)?;
    write(&dir.join("selection.csv"), table.to_csv())?;
    write(&dir.join("selection.json"), table.to_json()?)?;
    print!("{}", table.to_csv());
    Ok(Status::Ok)
}

fn print_averages(report: &ExperimentReport) {
    for a in &report.averages {
        let kind = a.kind.map_or("all".to_string(), |k| k.to_string());
        match a.mean_f1_pct {
            Some(f1) => println!("{} / {kind}: mean F1 {f1:.1}% over {} cells", a.scheme, a.n_cells),
            None => println!("{} / {kind}: no successful cells", a.scheme),
        }
    }
}

fn cmd_run(cli: &Cli, args: &GridArgs) -> Result<Status> {
    let (mut cfg, explicit) = experiment_config(cli, args)?;
    let (cohort, failures) = load_feature_cohort(&cfg.manifest, &cfg.extraction)?;
    report_failures(&failures);
    restrict_tasks(&mut cfg, explicit, &cohort);
    let report = run_grid(&cohort, &cfg)?;
    let dir = out_dir(&cfg)?;
    write(&dir.join("report.json"), report.to_json()?)?;
    write(&dir.join("report.csv"), report.to_csv())?;
    print_averages(&report);
    if report.failed_cells > 0 {
        let failed: Vec<_> = report.cells.iter().filter(|c| c.f1().is_none()).collect();
        write(&dir.join("failures.json"), serde_json::to_string_pretty(&failed)?)?;
        eprintln!("{} of {} cells failed; see failures.json", report.failed_cells, report.cells.len());
        return Ok(Status::Partial);
    }
    Ok(Status::Ok)
}

fn cmd_aff(cli: &Cli, args: &GridArgs) -> Result<Status> {
    let (mut cfg, explicit) = experiment_config(cli, args)?;
    let seed = cfg.seeds[0];
    let (clips, failures) = load_audio_cohort(&cfg.manifest)?;
    report_failures(&failures);
    restrict_tasks(&mut cfg, explicit, &clips);
    let rates: std::collections::BTreeSet<u32> = clips
        .patients()
        .iter()
        .flat_map(|p| p.tasks.values())
        .flat_map(|r| r.wet.iter().chain(r.dry.iter()))
        .map(|c| c.sample_rate_hz())
        .collect();
    let sample_rate = match rates.len() {
        1 => *rates.first().expect("one rate"),
        0 => return Err(Error::InsufficientData("no audio clips loaded".into())),
        _ => return Err(Error::Config(format!("clips mix sample rates {rates:?}"))),
    };
    let specs = spectrogram_cohort(&clips, &cfg.aff.spectrogram)?;
    let report = analyze_aff(&specs, &cfg.tasks, sample_rate, &cfg.aff, seed)?;
    let dir = out_dir(&cfg)?;
    write(&dir.join("importance.csv"), report.curves_csv())?;
    write(&dir.join("importance.svg"), report.svg())?;
    let models = dir.join("models");
    fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
    for t in &report.tasks {
        let config = serde_json::json!({ "task": t.task, "seed": seed, "aff": cfg.aff });
        save_model(models.join(format!("aff_{}.json", t.task)), &t.model, config)?;
    }
    let summary = serde_json::json!({
        "config": cfg,
        "bin_hz": report.bin_hz,
        "peak_hz": report.peak_hz,
        "tasks": report.tasks.iter().map(|t| serde_json::json!({
            "task": t.task,
            "peak_hz": t.peak_hz,
            "metrics": t.metrics,
            "empty_filters": t.training.empty_filters,
            "split": t.split,
        })).collect::<Vec<_>>(),
        "failures": report.failures,
    });
    write(&dir.join("aff_report.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("importance peak at {:.1} Hz", report.peak_hz);
    for t in &report.tasks {
        println!("{}: peak {:.1} Hz, F1 {:.1}%", t.task, t.peak_hz, 100.0 * t.metrics.f1);
    }
    if report.failures.is_empty() {
        Ok(Status::Ok)
    } else {
        Ok(Status::Partial)
    }
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<Status> {
    let mut cfg: SynthConfig = match &cli.config {
        Some(p) => read_json_config(p)?,
        None => SynthConfig::default(),
    };
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Feature => SynthMode::Feature,
            ModeArg::Signal => SynthMode::Signal,
        };
    }
    if let Some(v) = args.patients {
        cfg.n_patients = v;
    }
    if let Some(v) = args.female_fraction {
        cfg.female_fraction = v;
    }
    if let Some(v) = args.effect {
        cfg.effect_scale = v;
    }
    if let Some(v) = args.confound {
        cfg.confound_scale = v;
    }
    if let Some(v) = args.noise {
        cfg.noise_scale = v;
    }
    if let Some(b) = &args.band {
        let [lo, hi] = b[..] else {
            return Err(Error::Config(format!("--band takes two frequencies, got {b:?}")));
        };
        cfg.planted_band_hz = (lo, hi);
    }
    if let Some(v) = &args.tasks {
        cfg.tasks = v.clone();
    }
    if let Some(v) = args.features {
        cfg.n_features = v;
    }
    if let Some(v) = args.duration {
        cfg.duration_s = v;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let dir = cli
        .out
        .clone()
        .ok_or_else(|| Error::Config("synth needs --out <dir>".into()))?;
    match cfg.mode {
        SynthMode::Feature => gen_feature_cohort(&cfg)?.write(&dir, cli.force)?,
        SynthMode::Signal => gen_signal_cohort(&cfg)?.write(&dir, cli.force)?,
    }
    println!("wrote {} patients to {}", cfg.n_patients, dir.display());
    Ok(Status::Ok)
}

fn cmd_report(cli: &Cli, path: &Path) -> Result<Status> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report = ExperimentReport::from_json(&text)?;
    let csv = report.to_csv();
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write(&dir.join("report.csv"), csv)?;
        }
        None => print!("{csv}"),
    }
    Ok(Status::Ok)
}

fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Extract(a) => cmd_extract(cli, a),
        Command::Select(a) => cmd_select(cli, a),
        Command::Run(a) => cmd_run(cli, a),
        Command::Aff(a) => cmd_aff(cli, a),
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Report { report } => cmd_report(cli, report),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("HFVOICE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
