//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use hfvoice_core::audio::AudioClip;
use hfvoice_core::cohort::{build_pairwise, split_by_patient, Cohort, PatientRecord, TaskRecordings};
use hfvoice_core::experiment::*;
use hfvoice_core::features::{f0_autocorrelation, ExtractionParams, FeatureVector};
use hfvoice_core::matrix::Matrix;
use hfvoice_core::nn::gradcheck::{check_model, check_model_tensors};
use hfvoice_core::nn::*;
use hfvoice_core::stats::{student_t_p, SelectionMask, TestKind};
use hfvoice_core::synth::*;
use hfvoice_core::types::{Group, Scheme, Sex, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn confounded_cohort(seed: u64) -> Cohort<FeatureVector> {
    let cfg = SynthConfig {
        n_patients: 60,
        effect_scale: 1.0,
        confound_scale: 3.0,
        noise_scale: 0.3,
        tasks: Task::ALL.to_vec(),
        seed,
        ..SynthConfig::default()
    };
    gen_feature_cohort(&cfg).expect("synthetic cohort").cohort
}

fn grid_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        tasks: vec![Task::Pg],
        groups: vec![Group::All],
        test_kinds: vec![TestKind::Paired],
        seeds: vec![seed],
        ..ExperimentConfig::default()
    }
}

fn scheme_means(cohorts: &[(u64, Cohort<FeatureVector>)]) -> Result<(f64, f64), String> {
    let mut pw = Vec::new();
    let mut pair = Vec::new();
    for (seed, cohort) in cohorts {
        let report = run_grid(cohort, &grid_config(*seed)).map_err(|e| e.to_string())?;
        if report.failed_cells > 0 {
            return Err(format!("seed {seed}: {} failed cells", report.failed_cells));
        }
        pw.push(report.average_f1(Scheme::PatientWise).unwrap_or(0.0));
        pair.push(report.average_f1(Scheme::PairWise).unwrap_or(0.0));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(&pw), mean(&pair)))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cohorts: Vec<_> = (0..5).map(|s| (s, confounded_cohort(s))).collect();
    let (pw, pair) = scheme_means(&cohorts)?;
    let secs = start.elapsed().as_secs_f64();
    check(
        pair >= pw + 0.10 && secs < 120.0,
        format!("pair-wise F1 {pair:.3}, patient-wise F1 {pw:.3}, gap {:.3} (need >= 0.10), {secs:.1} s", pair - pw),
    )
}

fn criterion_2() -> Outcome {
    let cohorts: Vec<_> = (0..5)
        .map(|s| {
            let cfg = SynthConfig {
                n_patients: 60,
                effect_scale: 1.0,
                confound_scale: 0.0,
                noise_scale: 0.2,
                seed: s,
                ..SynthConfig::default()
            };
            (s, gen_feature_cohort(&cfg).expect("synthetic cohort").cohort)
        })
        .collect();
    let (pw, pair) = scheme_means(&cohorts)?;
    check(pw >= 0.95 && pair >= 0.95, format!("patient-wise F1 {pw:.3}, pair-wise F1 {pair:.3} (need >= 0.95)"))
}

fn criterion_3() -> Outcome {
    let groups = [Group::Male, Group::Female, Group::All];
    let kinds = [TestKind::Independent, TestKind::Paired];
    let mut cells = 0;
    let mut violations = Vec::new();
    for seed in 0..5 {
        let cohort = confounded_cohort(seed);
        let (table, _) = selection_table(&cohort, "synthetic", &Task::ALL, &groups, &kinds, 0.05);
        for &g in &groups {
            for &t in &Task::ALL {
                let pair = table.cell("synthetic", g, TestKind::Paired, t);
                let ind = table.cell("synthetic", g, TestKind::Independent, t);
                cells += 1;
                match (pair, ind) {
                    (Some(p), Some(i)) if p >= i => {}
                    other => violations.push(format!("seed {seed} {t}/{g:?}: {other:?}")),
                }
            }
        }
    }
    check(
        violations.is_empty(),
        format!("{} of {cells} task/sex cells have paired >= independent {violations:?}", cells - violations.len()),
    )
}

fn criterion_4() -> Outcome {
    let (err, t, dof) = common::max_oracle_error(|t, dof| student_t_p(t, dof).expect("p-value"));
    let cauchy = student_t_p(1.0, 1.0).map_err(|e| e.to_string())?;
    check(
        err <= 1e-6 && (cauchy - 0.5).abs() <= 1e-9,
        format!("max oracle error {err:.2e} (t={t}, dof={dof}), Cauchy p = {cauchy}"),
    )
}

fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).expect("shape")
}

fn criterion_5() -> Outcome {
    let mut worst = [0.0f64; 3];
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rng.random_range(2..6);
        let net = DenseNet3::new(input, (rng.random_range(3..9), rng.random_range(2..6)), seed);
        let x: Vec<Vec<f64>> = (0..7).map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = (0..7).map(|i| i % 2).collect();
        let g = check_model(&net, &x, &y, 1e-5, 200, &mut rng).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(g.max_relative_error);

        let d_freq = rng.random_range(6..12);
        let d_new = rng.random_range(2..5);
        let specs: Vec<Matrix> = (0..5)
            .map(|_| {
                let t = rng.random_range(3..7);
                random_matrix(t, d_freq, 0.0, 2.0, &mut rng)
            })
            .collect();
        let labels: Vec<usize> = (0..specs.len()).map(|i| i % 2).collect();
        for (slot, kind, tensors) in [
            (1, EncoderKind::MeanPool, vec![0]),
            (2, EncoderKind::Attention, (1..=8).collect::<Vec<_>>()),
        ] {
            let aff = AffMatrix::new(random_matrix(d_freq, d_new, 0.1, 1.0, &mut rng), 3, 1);
            let model = AffModel::new(aff, SeqEncoder::build(kind, d_new, 6, seed), DenseNet3::new(d_new, (8, 5), seed))
                .map_err(|e| e.to_string())?;
            let g = check_model_tensors(&model, &specs, &labels, 1e-5, 100, &tensors, &mut rng)
                .map_err(|e| e.to_string())?;
            worst[slot] = worst[slot].max(g.max_relative_error);
        }
    }
    check(
        worst[0] < 1e-5 && worst[1] < 1e-5 && worst[2] < 1e-4,
        format!(
            "max relative error: dense {:.1e}, AFF {:.1e}, attention {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn support_violations(aff: &AffMatrix) -> usize {
    let w = aff.trim_halfwidth_bins;
    (0..aff.d_new())
        .map(|c| {
            let col = aff.weights.column(c);
            let m = first_argmax(&col);
            col.iter()
                .enumerate()
                .filter(|&(f, &v)| v != 0.0 && (f + w < m || f > m + w))
                .count()
        })
        .sum()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut events = 0;
    let mut bad = Vec::new();
    for trial in 0..200 {
        let mut aff = AffMatrix::new(random_matrix(40, 6, -1.0, 1.0, &mut rng), rng.random_range(0..8), 1);
        trim_in_place(&mut aff);
        events += 1;
        let once = aff.weights.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        trim_in_place(&mut aff);
        let twice = aff.weights.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if support_violations(&aff) > 0 || once != twice {
            bad.push(format!("random trial {trial}"));
        }
    }
    // training run: the state after epoch e of a long run equals the final
    // state of an e-epoch run, so this visits every trim event
    let d_freq = 30;
    let specs: Vec<Matrix> = (0..8).map(|_| random_matrix(5, d_freq, 0.0, 2.0, &mut rng)).collect();
    let labels: Vec<usize> = (0..8).map(|i| i % 2).collect();
    let init = AffMatrix::new(random_matrix(d_freq, 4, 0.0, 1.0, &mut rng), 3, 3);
    for epochs in 1..=9 {
        let mut model = AffModel::new(init.clone(), SeqEncoder::mean_pool(4), DenseNet3::new(4, (8, 4), 1))
            .map_err(|e| e.to_string())?;
        let cfg = TrainConfig { lr: 1e-2, epochs, batch_size: 4, seed: 2, trim: true };
        let report = train(&mut model, &specs, &labels, &cfg).map_err(|e| e.to_string())?;
        events += report.trim_events;
        let before = model.aff.clone();
        model.trim();
        if support_violations(&before) > 0 || before != model.aff {
            bad.push(format!("training run of {epochs} epochs"));
        }
    }
    check(bad.is_empty(), format!("{events} trim events checked, violations {bad:?}"))
}

fn criterion_7() -> Outcome {
    let (lo, hi) = (700.0, 900.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let cfg = SynthConfig {
            mode: SynthMode::Signal,
            tasks: Task::ALL.to_vec(),
            n_patients: 40,
            effect_scale: 3.0,
            confound_scale: 1.0,
            noise_scale: 0.1,
            duration_s: 1.0,
            planted_band_hz: (lo, hi),
            seed,
            ..SynthConfig::default()
        };
        let cohort = gen_signal_cohort(&cfg).map_err(|e| e.to_string())?;
        let acfg = AffConfig::default();
        let specs = spectrogram_cohort(&cohort.audio_cohort().map_err(|e| e.to_string())?, &acfg.spectrogram)
            .map_err(|e| e.to_string())?;
        let report = analyze_aff(&specs, &Task::ALL, cfg.sample_rate_hz, &acfg, seed).map_err(|e| e.to_string())?;
        let curve = &report.aggregate.mean;
        let target = band_mass(curve, report.bin_hz, lo, hi);
        let nyquist = cfg.sample_rate_hz as f64 / 2.0;
        let mut best = (f64::MIN, 0.0);
        let mut start = lo % 200.0;
        while start + 200.0 <= nyquist {
            if start != lo {
                let m = band_mass(curve, report.bin_hz, start, start + 200.0);
                if m > best.0 {
                    best = (m, start);
                }
            }
            start += 200.0;
        }
        ok &= target > best.0;
        lines.push(format!(
            "seed {seed}: band mass {target:.2} vs {:.2} at {:.0}-{:.0} Hz, peak {:.0} Hz",
            best.0,
            best.1,
            best.1 + 200.0,
            report.peak_hz
        ));
    }
    check(ok, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let sr = 22050.0;
    let samples: Vec<f64> = (0..22050)
        .map(|i| {
            let t = i as f64 / sr;
            (1..=8).map(|k| 0.4 / k as f64 * (2.0 * PI * 200.0 * k as f64 * t).sin()).sum()
        })
        .collect();
    let clip = AudioClip::new(samples, 22050).map_err(|e| e.to_string())?;
    let params = ExtractionParams::default();
    let track = f0_autocorrelation(&clip, params.f0_min_hz, params.f0_max_hz).map_err(|e| e.to_string())?;
    let voiced: Vec<f64> = track.values.iter().zip(&track.mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    let fraction = voiced.len() as f64 / track.values.len() as f64;
    let worst = voiced.iter().map(|f| (f - 200.0).abs()).fold(0.0, f64::max);
    check(
        fraction >= 0.9 && worst <= 2.0,
        format!("voiced fraction {fraction:.3}, max |F0 - 200| = {worst:.3} Hz"),
    )
}

fn dyadic(rng: &mut impl Rng) -> f64 {
    rng.random_range(-4096i64..4096) as f64 / 256.0
}

fn offset_cohort(cohort: &Cohort<FeatureVector>, offsets: &BTreeMap<String, Vec<f64>>) -> Cohort<FeatureVector> {
    let patients = cohort
        .patients()
        .iter()
        .map(|p| {
            let shift = &offsets[&p.patient_id];
            PatientRecord {
                patient_id: p.patient_id.clone(),
                sex: p.sex,
                tasks: p
                    .tasks
                    .iter()
                    .map(|(&t, r)| {
                        let recs = TaskRecordings {
                            wet: r.wet.as_ref().map(|v| v.offset_by(shift)),
                            dry: r.dry.as_ref().map(|v| v.offset_by(shift)),
                        };
                        (t, recs)
                    })
                    .collect(),
            }
        })
        .collect();
    Cohort::new(patients).expect("offset cohort")
}

fn pair_bits(cohort: &Cohort<FeatureVector>, split: &hfvoice_core::cohort::SplitPlan, mask: &SelectionMask, seed: u64)
    -> Vec<(String, usize, Vec<u64>)> {
    let sets = build_pairwise(cohort, Task::Pg, split, mask, seed).expect("pair sets");
    sets.train
        .iter()
        .chain(&sets.test)
        .map(|s| (s.patient_id.clone(), s.label, s.x.iter().map(|v| v.to_bits()).collect()))
        .collect()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let names: Vec<String> = (0..6).map(|i| format!("f{i}")).collect();
    let mut identical = 0;
    let mut worst_general = 0.0f64;
    for trial in 0..1000u64 {
        let n = rng.random_range(4..12);
        let vector = |rng: &mut ChaCha8Rng| {
            FeatureVector::new(names.clone(), (0..names.len()).map(|_| dyadic(rng)).collect()).expect("vector")
        };
        let patients: Vec<PatientRecord<FeatureVector>> = (0..n)
            .map(|i| PatientRecord {
                patient_id: format!("p{i:02}"),
                sex: if i % 2 == 0 { Sex::Female } else { Sex::Male },
                tasks: BTreeMap::from([(
                    Task::Pg,
                    TaskRecordings { wet: Some(vector(&mut rng)), dry: Some(vector(&mut rng)) },
                )]),
            })
            .collect();
        let cohort = Cohort::new(patients).map_err(|e| e.to_string())?;
        let split = split_by_patient(&cohort, 0.3, trial).map_err(|e| e.to_string())?;
        let mask = SelectionMask::from_selected_names(&names, &names[..4], TestKind::Paired, 0.05)
            .map_err(|e| e.to_string())?;
        let dyadic_offsets: BTreeMap<String, Vec<f64>> = cohort
            .patient_ids()
            .iter()
            .map(|id| (id.to_string(), (0..names.len()).map(|_| dyadic(&mut rng)).collect()))
            .collect();
        let base = pair_bits(&cohort, &split, &mask, trial);
        if base == pair_bits(&offset_cohort(&cohort, &dyadic_offsets), &split, &mask, trial) {
            identical += 1;
        }
        let general: BTreeMap<String, Vec<f64>> = cohort
            .patient_ids()
            .iter()
            .map(|id| (id.to_string(), (0..names.len()).map(|_| rng.random_range(-1e3..1e3)).collect()))
            .collect();
        for ((_, la, a), (_, lb, b)) in base.iter().zip(pair_bits(&offset_cohort(&cohort, &general), &split, &mask, trial)) {
            if *la != lb {
                worst_general = f64::INFINITY;
            }
            for (x, y) in a.iter().zip(&b) {
                worst_general = worst_general.max((f64::from_bits(*x) - f64::from_bits(*y)).abs());
            }
        }
    }
    check(
        identical == 1000 && worst_general <= 1e-9,
        format!("{identical}/1000 trials bit-identical with dyadic offsets; general offsets max deviation {worst_general:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let cohort = confounded_cohort(10);
    let cfg = ExperimentConfig { groups: vec![Group::All, Group::Female], ..grid_config(10) };
    let a = run_grid(&cohort, &cfg).map_err(|e| e.to_string())?;
    let b = run_grid(&cohort, &cfg).map_err(|e| e.to_string())?;
    let reports_equal = a.to_json().map_err(|e| e.to_string())? == b.to_json().map_err(|e| e.to_string())?
        && a.to_csv() == b.to_csv();

    let signal = SynthConfig {
        mode: SynthMode::Signal,
        n_patients: 10,
        duration_s: 0.5,
        seed: 10,
        ..SynthConfig::default()
    };
    let clips = gen_signal_cohort(&signal).map_err(|e| e.to_string())?;
    let acfg = AffConfig {
        train: TrainConfig { epochs: 4, ..AffConfig::default().train },
        ..AffConfig::default()
    };
    let specs = spectrogram_cohort(&clips.audio_cohort().map_err(|e| e.to_string())?, &acfg.spectrogram)
        .map_err(|e| e.to_string())?;
    let r1 = analyze_aff(&specs, &[Task::Pg], signal.sample_rate_hz, &acfg, 10).map_err(|e| e.to_string())?;
    let r2 = analyze_aff(&specs, &[Task::Pg], signal.sample_rate_hz, &acfg, 10).map_err(|e| e.to_string())?;
    let aff_equal = r1.curves_csv() == r2.curves_csv() && r1.svg() == r2.svg();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("aff_model.json");
    let model = &r1.tasks[0].model;
    save_model(&path, model, serde_json::Value::Null).map_err(|e| e.to_string())?;
    let loaded = load_model::<AffModel>(&path).map_err(|e| e.to_string())?.model;
    let inputs: Vec<&Matrix> = specs.patients().iter().flat_map(|p| p.tasks.values()).flat_map(|r| [r.wet.as_ref(), r.dry.as_ref()]).flatten().collect();
    let bits = |m: &AffModel| -> Result<Vec<u64>, String> {
        Ok(m.predict_proba(&inputs).map_err(|e| e.to_string())?.iter().flatten().map(|v| v.to_bits()).collect())
    };
    let roundtrip = bits(model)? == bits(&loaded)?;
    check(
        reports_equal && aff_equal && roundtrip,
        format!(
            "grid reports identical: {reports_equal}, AFF outputs identical: {aff_equal}, save/load predictions bit-exact over {} inputs: {roundtrip}",
            inputs.len()
        ),
    )
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (n, run) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("criterion {n}: PASS ({detail}) [{:.1} s]", start.elapsed().as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail}) [{:.1} s]", start.elapsed().as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
