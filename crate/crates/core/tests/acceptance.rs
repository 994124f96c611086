//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pulsegan --test acceptance -- --nocapture` to see
//! the report. The end-to-end toy training run takes several minutes on one
//! CPU core.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::suites;
use pulsegan::autodiff::Graph;
use pulsegan::bp_extract::{align_beats, detect_beats, extract_sbp_dbp};
use pulsegan::cyclegan::{
    adversarial_loss, adversarial_loss_value, cycle_loss_value, preprocess, total_objective_value, train,
    training_windows, translate, GanForm, ObjectiveParts, PatModel, Side, StepMetrics, TrainConfig,
    DEFAULT_LAMBDA_CYC,
};
use pulsegan::dsp::{
    denormalize, fft_filter, normalize, reconstruct_from_windows, segment_windows, window_count, FilterBand,
};
use pulsegan::eval::{
    bland_altman, check_disjoint, grade_from_fractions, mae, pearson, rmse, run_protocol, BhsGrade, Protocol,
    ProtocolOptions,
};
use pulsegan::nets::{DiscriminatorSpec, GeneratorSpec};
use pulsegan::signal_io::{generate_synthetic_pair, make_folds, SignalRecord, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1 and 2

fn gradients() -> Outcome {
    let start = Instant::now();
    let ops = suites::operator_errors();
    let gen = suites::generator_error(60, 4);
    let elapsed = start.elapsed();
    let (worst_op, worst) = ops
        .iter()
        .fold(("", 0.0f64), |acc, &(n, e)| if e > acc.1 { (n, e) } else { acc });
    ensure(worst < 1e-4, || format!("{worst_op} relative error {worst:.2e}"))?;
    let gen_err = gen.relative_error;
    ensure(gen_err < 1e-4, || format!("full generator relative error {gen_err:.2e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} operators worst {worst:.1e} ({worst_op}), generator {gen_err:.1e} over {} parameters ({} kink draws redrawn), {:.1}s",
        ops.len(),
        gen.samples,
        gen.kinks,
        elapsed.as_secs_f64()
    ))
}

fn adjoint() -> Outcome {
    let worst = suites::adjoint_worst(100, 2024);
    ensure(worst < 1e-9, || format!("worst gap {worst:.2e}"))?;
    Ok(format!("100 cases, worst relative gap {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

fn sine(freq: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 125.0).sin()).collect()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn dsp_contracts() -> Outcome {
    let n = 2500;
    for (name, band) in [("band-pass", FilterBand::band_pass(0.1, 8.0)), ("low-pass", FilterBand::low_pass(5.0))] {
        let pass = sine(1.0, n);
        let out = fft_filter(&pass, 125.0, band).map_err(|e| e.to_string())?;
        let err = rms(&out.iter().zip(&pass).map(|(a, b)| a - b).collect::<Vec<_>>()) / rms(&pass);
        ensure(err < 0.01, || format!("{name}: 1 Hz distorted by {err:.3}"))?;
        let stop = sine(20.0, n);
        let out = fft_filter(&stop, 125.0, band).map_err(|e| e.to_string())?;
        let left = rms(&out) / rms(&stop);
        ensure(left < 0.01, || format!("{name}: 20 Hz kept {left:.3}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let v: Vec<f64> = (0..500).map(|_| rng.random_range(-300.0..300.0)).collect();
        let (y, p) = normalize(&v).map_err(|e| e.to_string())?;
        let back = denormalize(&y, &p).map_err(|e| e.to_string())?;
        let worst = back.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(worst < 1e-9, || format!("normalize round trip off by {worst:.2e}"))?;
    }
    ensure(window_count(37500) == 194, || "window_count(37500) != 194".into())?;
    let long: Vec<f64> = (0..37500).map(|i| (i as f64 * 0.05).sin() * 0.9).collect();
    let (norm, p) = normalize(&long).map_err(|e| e.to_string())?;
    let batch = segment_windows(&norm, p, "s").map_err(|e| e.to_string())?;
    ensure(batch.len() == 194, || format!("segment gave {} windows", batch.len()))?;
    let back = reconstruct_from_windows(&batch).map_err(|e| e.to_string())?;
    let worst = back.iter().zip(&norm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(worst < 1e-9, || format!("reconstruct differs by {worst:.2e}"))?;
    Ok(format!("filters within 1%, 194 windows, round trips within {worst:.1e}"))
}

// ---------------------------------------------------------------- 4

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    for case in 0..1000 {
        let n = rng.random_range(3..150);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..190.0)).collect();
        let p: Vec<f64> = t.iter().map(|v| v + rng.random_range(-15.0..15.0)).collect();
        let nf = n as f64;
        let mut sa = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            sa += (t[i] - p[i]).abs();
            ss += (t[i] - p[i]) * (t[i] - p[i]);
        }
        let (mt, mp) = (t.iter().sum::<f64>() / nf, p.iter().sum::<f64>() / nf);
        let st = (t.iter().map(|v| (v - mt).powi(2)).sum::<f64>() / nf).sqrt();
        let sp = (p.iter().map(|v| (v - mp).powi(2)).sum::<f64>() / nf).sqrt();
        let r: f64 = (0..n).map(|i| (t[i] - mt) / st * (p[i] - mp) / sp).sum::<f64>() / nf;
        let d: Vec<f64> = (0..n).map(|i| p[i] - t[i]).collect();
        let md = d.iter().sum::<f64>() / nf;
        let sd = (d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / nf).sqrt();
        let ba = bland_altman(&t, &p).map_err(|e| e.to_string())?;
        let ok = close(mae(&t, &p).unwrap(), sa / nf)
            && close(rmse(&t, &p).unwrap(), (ss / nf).sqrt())
            && close(pearson(&t, &p).unwrap().r, r)
            && close(ba.mean_diff, md)
            && close(ba.lower_loa, md - 1.96 * sd)
            && close(ba.upper_loa, md + 1.96 * sd);
        ensure(ok, || format!("case {case} disagrees with the brute-force formulas"))?;
    }
    let rows = [
        ([85.0, 95.0, 98.0], BhsGrade::A),
        ([60.0, 85.0, 95.0], BhsGrade::A),
        ([50.0, 75.0, 90.0], BhsGrade::B),
        ([40.0, 65.0, 85.0], BhsGrade::C),
        ([45.0, 70.0, 86.0], BhsGrade::C),
        ([39.9, 65.0, 85.0], BhsGrade::Fail),
    ];
    for (f, g) in rows {
        ensure(grade_from_fractions(f) == g, || format!("{f:?} graded {:?}", grade_from_fractions(f)))?;
    }
    Ok("1000 random vectors within 1e-12; BHS table rows exact".into())
}

// ---------------------------------------------------------------- 5

fn loss_formulas() -> Outcome {
    let two_log2 = 2.0 * std::f64::consts::LN_2;
    let v = adversarial_loss_value(&[0.5; 30], &[0.5; 30], Side::Discriminator, GanForm::Log)
        .map_err(|e| e.to_string())?;
    ensure((v - two_log2).abs() < 1e-12, || format!("value form gives {v}"))?;
    let mut g = Graph::<f64>::new();
    let real = g.constant(vec![2, 1, 30], vec![0.5; 60]);
    let fake = g.constant(vec![2, 1, 30], vec![0.5; 60]);
    let l = adversarial_loss(&mut g, Some(real), fake, Side::Discriminator, GanForm::Log)
        .map_err(|e| e.to_string())?;
    ensure((g.item(l) - two_log2).abs() < 1e-12, || format!("graph form gives {}", g.item(l)))?;
    let x = [0.3, -0.2, 0.9];
    let y = [0.1, 0.5];
    let c = cycle_loss_value(&x, &x, &y, &y).map_err(|e| e.to_string())?;
    ensure(c == 0.0, || format!("perfect cycle gives {c}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let p: [f64; 3] = [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..2.0)];
        let q: [f64; 3] = [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..2.0)];
        let lam = rng.random_range(0.1..20.0);
        let f = |v: [f64; 3]| {
            total_objective_value(ObjectiveParts { gan_g: v[0], gan_f: v[1], cyc: v[2] }, lam).unwrap()
        };
        let sum = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
        ensure((f(sum) - f(p) - f(q)).abs() < 1e-9, || "total objective not additive".into())?;
        ensure((f([2.0 * p[0], 2.0 * p[1], 2.0 * p[2]]) - 2.0 * f(p)).abs() < 1e-9, || {
            "total objective not homogeneous".into()
        })?;
    }
    let four = total_objective_value(ObjectiveParts { gan_g: 1.0, gan_f: 1.0, cyc: 0.2 }, DEFAULT_LAMBDA_CYC)
        .map_err(|e| e.to_string())?;
    ensure((four - 4.0).abs() < 1e-12, || format!("(1, 1, 0.2) gives {four}"))?;
    ensure(
        DEFAULT_LAMBDA_CYC == 10.0 && TrainConfig::default().lambda_cyc == 10.0,
        || "default lambda is not 10".into(),
    )?;
    Ok(format!("2 log 2 = {v:.12}, perfect cycle 0, linear objective, lambda 10"))
}

// ---------------------------------------------------------------- 6

const TOY_TRAIN_SUBJECTS: u64 = 8;
const TOY_HELDOUT_SUBJECTS: u64 = 2;
const TOY_SAMPLES: usize = 4096;
const TOY_STEP_LIMIT: usize = 5000;
const TOY_TIME_LIMIT: Duration = Duration::from_secs(15 * 60);
const CYCLE_RATIO_LIMIT: f64 = 0.2;
/// Held-out per-beat MAE envelopes (mmHg), frozen from the reference toy run.
const SBP_MAE_ENVELOPE: f64 = 2.0;
const DBP_MAE_ENVELOPE: f64 = 5.0;

fn mean_cyc(h: &[StepMetrics]) -> f64 {
    h.iter().map(|m| m.loss_cyc).sum::<f64>() / h.len() as f64
}

fn toy_run() -> Outcome {
    let cfg = TrainConfig::toy();
    ensure(cfg.max_steps.is_some_and(|s| s <= TOY_STEP_LIMIT), || "toy config exceeds the step budget".into())?;
    let synth = SynthConfig::steady();
    let records: Vec<SignalRecord> = (0..TOY_TRAIN_SUBJECTS + TOY_HELDOUT_SUBJECTS)
        .map(|s| generate_synthetic_pair(s, TOY_SAMPLES, &synth))
        .collect::<pulsegan::Result<_>>()
        .map_err(|e| e.to_string())?;
    let (train_recs, held_out) = records.split_at(TOY_TRAIN_SUBJECTS as usize);
    let prepped = train_recs.iter().map(preprocess).collect::<pulsegan::Result<Vec<_>>>().map_err(|e| e.to_string())?;
    let (x, y) = training_windows::<f32>(&prepped).map_err(|e| e.to_string())?;

    let start = Instant::now();
    let mut model = PatModel::<f32>::new(&cfg).map_err(|e| e.to_string())?;
    let history = train(&mut model, &x, &y, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let steps = history.len();
    ensure(steps <= TOY_STEP_LIMIT && steps >= 2200, || format!("ran {steps} steps"))?;
    ensure(elapsed <= TOY_TIME_LIMIT, || format!("training took {elapsed:?}"))?;
    let first = mean_cyc(&history[..200]);
    let last = mean_cyc(&history[steps - 2000..]);
    let ratio = last / first;

    let (mut t_sbp, mut p_sbp, mut t_dbp, mut p_dbp) = (vec![], vec![], vec![], vec![]);
    for rec in held_out {
        let p = preprocess(rec).map_err(|e| e.to_string())?;
        let out = translate(&model, rec, &p.abp_norm).map_err(|e| e.to_string())?;
        let reference = &p.abp_filtered[..out.len()];
        let truth = extract_sbp_dbp(reference, &detect_beats(reference, 125.0).unwrap()).unwrap();
        let pred = extract_sbp_dbp(&out.abp, &detect_beats(&out.abp, 125.0).unwrap()).unwrap();
        for (a, b) in align_beats(&truth, &pred, 125.0).unwrap() {
            t_sbp.push(truth.sbp[a]);
            p_sbp.push(pred.sbp[b]);
            t_dbp.push(truth.dbp[a]);
            p_dbp.push(pred.dbp[b]);
        }
    }
    ensure(!t_sbp.is_empty(), || "no held-out beats matched".into())?;
    let sbp = mae(&t_sbp, &p_sbp).unwrap();
    let dbp = mae(&t_dbp, &p_dbp).unwrap();
    let detail = format!(
        "{steps} steps in {:.0}s, cycle {first:.4} -> {last:.4} (ratio {ratio:.3}), held-out SBP MAE {sbp:.2}, DBP MAE {dbp:.2} over {} beats",
        elapsed.as_secs_f64(),
        t_sbp.len()
    );
    ensure(ratio < CYCLE_RATIO_LIMIT, || format!("cycle ratio {ratio:.3} not below {CYCLE_RATIO_LIMIT}; {detail}"))?;
    ensure(sbp < SBP_MAE_ENVELOPE && dbp < DBP_MAE_ENVELOPE, || format!("beat errors above envelope; {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 7

fn protocol_integrity() -> Outcome {
    let ids: Vec<String> = (0..92).map(|i| format!("subject-{i:03}")).collect();
    for seed in 0..20 {
        let plan = make_folds(&ids, 5, seed).map_err(|e| e.to_string())?;
        for k in 0..5 {
            let test = plan.test_subjects(k);
            let train = plan.train_subjects(k);
            ensure(test.len() + train.len() == 92, || format!("fold {k} loses subjects"))?;
            check_disjoint(&[], &train, &test).map_err(|e| e.to_string())?;
        }
    }

    let synth = SynthConfig::default();
    let records: Vec<SignalRecord> = (0..4).map(|s| generate_synthetic_pair(s, 1500, &synth).unwrap()).collect();
    let rec_ids: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    let plan = make_folds(&rec_ids, 2, 7).map_err(|e| e.to_string())?;
    for k in 0..2 {
        let train_ids = plan.train_subjects(k);
        let test_ids = plan.test_subjects(k);
        let prepped: Vec<_> = records
            .iter()
            .filter(|r| train_ids.contains(&r.subject_id))
            .map(|r| preprocess(r).unwrap())
            .collect();
        let (x, y) = training_windows::<f32>(&prepped).map_err(|e| e.to_string())?;
        check_disjoint(&x.provenance, &train_ids, &test_ids).map_err(|e| e.to_string())?;
        check_disjoint(&y.provenance, &train_ids, &test_ids).map_err(|e| e.to_string())?;
    }
    let cfg = TrainConfig {
        epochs: 1,
        max_steps: Some(20),
        batch_size: 2,
        seed: 3,
        generator: GeneratorSpec {
            base_channels: 4,
            res_blocks: 2,
        },
        discriminator: DiscriminatorSpec {
            base_channels: 4,
            ..DiscriminatorSpec::default()
        },
        ..TrainConfig::default()
    };
    let protocol = Protocol::CrossSubject { plan };
    let opts = ProtocolOptions::default();
    let a = run_protocol::<f32>(&records, &protocol, &cfg, &opts).map_err(|e| e.to_string())?;
    let b = run_protocol::<f32>(&records, &protocol, &cfg, &opts).map_err(|e| e.to_string())?;
    for f in &a.report.folds {
        ensure(f.train_subjects.iter().all(|s| !f.test_subjects.contains(s)), || {
            format!("{} overlaps", f.label)
        })?;
    }
    let ja = a.report.to_json().map_err(|e| e.to_string())?;
    let jb = b.report.to_json().map_err(|e| e.to_string())?;
    ensure(ja == jb, || "reports differ between identical runs".into())?;
    Ok(format!("100 fold plans disjoint, window provenance clean, {} byte report reproduced", ja.len()))
}

// ---------------------------------------------------------------- 8

fn beat_invariants() -> Outcome {
    let mut beats = 0usize;
    let mut check = |sig: &[f64]| -> Result<(), String> {
        let s = extract_sbp_dbp(sig, &detect_beats(sig, 125.0).unwrap()).unwrap();
        ensure(s.sbp.iter().zip(&s.dbp).all(|(a, b)| a > b), || "beat with sbp <= dbp".into())?;
        beats += s.len();
        Ok(())
    };
    let synth = SynthConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for seed in 0..30 {
        let rec = generate_synthetic_pair(seed, 4096, &synth).unwrap();
        check(&rec.abp)?;
        check(&preprocess(&rec).unwrap().abp_filtered)?;
        let noisy: Vec<f64> = rec.abp.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
        check(&noisy)?;
        let junk: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..200.0)).collect();
        check(&junk)?;
    }
    for seed in 0..30 {
        let x = generate_synthetic_pair(seed, 2000, &synth).unwrap().abp;
        let base = extract_sbp_dbp(&x, &detect_beats(&x, 125.0).unwrap()).unwrap();
        let c = rng.random_range(-50.0..50.0);
        let s = rng.random_range(0.1..10.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
        let bs = extract_sbp_dbp(&shifted, &detect_beats(&shifted, 125.0).unwrap()).unwrap();
        let bk = extract_sbp_dbp(&scaled, &detect_beats(&scaled, 125.0).unwrap()).unwrap();
        ensure(bs.beat_indices == base.beat_indices && bk.beat_indices == base.beat_indices, || {
            format!("seed {seed}: beats moved under shift or scale")
        })?;
        for i in 0..base.len() {
            let pp = base.sbp[i] - base.dbp[i];
            ensure((bs.sbp[i] - base.sbp[i] - c).abs() < 1e-9 && (bs.dbp[i] - base.dbp[i] - c).abs() < 1e-9, || {
                format!("seed {seed}: shift not equivariant")
            })?;
            ensure(((bk.sbp[i] - bk.dbp[i]) - s * pp).abs() < 1e-9 * (1.0 + s * pp), || {
                format!("seed {seed}: scale not equivariant")
            })?;
        }
    }
    Ok(format!("{beats} beats with sbp > dbp; shift and scale equivariant"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient correctness", gradients),
        ("adjoint identity", adjoint),
        ("dsp contracts", dsp_contracts),
        ("metric oracles", metric_oracles),
        ("loss formulas", loss_formulas),
        ("end-to-end toy run", toy_run),
        ("protocol integrity", protocol_integrity),
        ("beat series invariants", beat_invariants),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
