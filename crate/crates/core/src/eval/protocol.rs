use std::collections::BTreeSet;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::report::{
    BeatPair, Columns, EvalReport, FoldStatus, ProtocolReport, ReportMeta, TargetMetrics, WindowAggregate, LOA_SD,
    P_VALUE_TEST,
};
use super::metrics::mae;
use crate::bp_extract::{align_beats_with, detect_beats_with, extract_sbp_dbp, BeatConfig};
use crate::cyclegan::{
    preprocess_with, train, training_windows, translate_with, PatModel, PreprocessConfig, StepMetrics, TrainConfig,
};
use crate::dsp::window_count;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal_io::{split_per_subject, FoldPlan, SignalRecord};
use crate::{HOP_LEN, WINDOW_LEN};

/// How records are divided into training and test material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Protocol {
    /// Train on the other folds' subjects, test on the held-out fold's subjects.
    CrossSubject { plan: FoldPlan },
    /// Train on the first `train_fraction` of each record and test on its remainder.
    PerSubject { train_fraction: f64 },
}

impl Protocol {
    fn name(&self) -> &'static str {
        match self {
            Protocol::CrossSubject { .. } => "cross_subject",
            Protocol::PerSubject { .. } => "per_subject",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProtocolOptions {
    pub beat: BeatConfig,
    pub preprocess: PreprocessConfig,
    /// Hash of the run configuration, copied into the report metadata.
    pub config_hash: Option<String>,
}

/// Everything produced for one fold: its report, the matched beats and the loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub report: EvalReport,
    pub beats: Vec<BeatPair>,
    pub window_means: Vec<[f64; 4]>,
    pub history: Vec<StepMetrics>,
}

/// Result of [`run_protocol`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub folds: Vec<FoldOutcome>,
    pub report: ProtocolReport,
}

/// Fold seeds differ from each other and from the run seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct FoldSpec {
    label: String,
    train: Vec<SignalRecord>,
    test: Vec<SignalRecord>,
    train_fraction: Option<f64>,
}

fn ids(records: &[SignalRecord]) -> Vec<String> {
    records.iter().map(|r| r.subject_id.clone()).collect()
}

fn fold_specs(records: &[SignalRecord], protocol: &Protocol) -> Result<Vec<FoldSpec>> {
    if records.is_empty() {
        return Err(Error::Argument("no records to evaluate".into()));
    }
    let unique: BTreeSet<&str> = records.iter().map(|r| r.subject_id.as_str()).collect();
    if unique.len() != records.len() {
        return Err(Error::Validation("subject ids must be unique across records".into()));
    }
    match protocol {
        Protocol::CrossSubject { plan } => {
            plan.validate()?;
            let planned: BTreeSet<&str> = plan.assignments.keys().map(String::as_str).collect();
            if planned != unique {
                return Err(Error::Validation(
                    "fold plan subjects do not match the dataset subjects".into(),
                ));
            }
            Ok((0..plan.fold_count)
                .map(|k| {
                    let test_ids = plan.test_subjects(k);
                    let (test, train): (Vec<_>, Vec<_>) =
                        records.iter().cloned().partition(|r| test_ids.contains(&r.subject_id));
                    FoldSpec {
                        label: format!("fold-{k}"),
                        train,
                        test,
                        train_fraction: None,
                    }
                })
                .collect())
        }
        Protocol::PerSubject { train_fraction } => records
            .iter()
            .map(|r| {
                let (train, test) = split_per_subject(r, *train_fraction)?;
                Ok(FoldSpec {
                    label: format!("subject-{}", r.subject_id),
                    train: vec![train],
                    test: vec![test],
                    train_fraction: Some(*train_fraction),
                })
            })
            .collect(),
    }
}

/// Fails unless every training window comes from a training subject and no
/// training subject is also a test subject.
pub fn check_disjoint(provenance: &[(String, usize)], train_ids: &[String], test_ids: &[String]) -> Result<()> {
    if let Some(id) = train_ids.iter().find(|id| test_ids.contains(id)) {
        return Err(Error::Validation(format!("subject {id} is in both train and test sets")));
    }
    if let Some((id, off)) = provenance.iter().find(|(id, _)| !train_ids.contains(id)) {
        return Err(Error::Validation(format!(
            "training window at offset {off} comes from non-training subject {id}"
        )));
    }
    Ok(())
}

/// Matched beats of one test record plus per-window mean pressures
/// `[true_sbp, pred_sbp, true_dbp, pred_dbp]`.
fn score_record<T: Scalar>(
    model: &PatModel<T>,
    record: &SignalRecord,
    opts: &ProtocolOptions,
) -> Result<(Vec<BeatPair>, Vec<[f64; 4]>, usize, usize)> {
    let beat = &opts.beat;
    let prepped = preprocess_with(record, &opts.preprocess)?;
    let out = translate_with(model, record, &prepped.abp_norm, &opts.preprocess)?;
    let fs = record.sample_rate_hz;
    let reference = &prepped.abp_filtered[..out.len()];
    let truth = extract_sbp_dbp(reference, &detect_beats_with(reference, fs, beat)?)?;
    let pred = extract_sbp_dbp(&out.abp, &detect_beats_with(&out.abp, fs, beat)?)?;
    let pairs: Vec<BeatPair> = align_beats_with(&truth, &pred, fs, beat.align_tolerance_s)?
        .into_iter()
        .map(|(a, b)| BeatPair {
            subject_id: record.subject_id.clone(),
            beat_index: truth.beat_indices[a],
            true_sbp: truth.sbp[a],
            pred_sbp: pred.sbp[b],
            true_dbp: truth.dbp[a],
            pred_dbp: pred.dbp[b],
        })
        .collect();
    let mut windows = Vec::new();
    for w in 0..window_count(out.len()) {
        let lo = w * HOP_LEN;
        let inside: Vec<&BeatPair> = pairs
            .iter()
            .filter(|p| (lo..lo + WINDOW_LEN).contains(&p.beat_index))
            .collect();
        if inside.is_empty() {
            continue;
        }
        let k = inside.len() as f64;
        let avg = |f: fn(&BeatPair) -> f64| inside.iter().map(|p| f(p)).sum::<f64>() / k;
        windows.push([
            avg(|p| p.true_sbp),
            avg(|p| p.pred_sbp),
            avg(|p| p.true_dbp),
            avg(|p| p.pred_dbp),
        ]);
    }
    Ok((pairs, windows, truth.len(), pred.len()))
}

fn window_aggregate(means: &[[f64; 4]]) -> Result<Option<WindowAggregate>> {
    if means.is_empty() {
        return Ok(None);
    }
    let col = |i: usize| means.iter().map(|m| m[i]).collect::<Vec<_>>();
    Ok(Some(WindowAggregate {
        n_windows: means.len(),
        sbp_mae: mae(&col(0), &col(1))?,
        dbp_mae: mae(&col(2), &col(3))?,
    }))
}

fn fill_metrics(report: &mut EvalReport, beats: &[BeatPair], windows: &[[f64; 4]]) -> Result<()> {
    report.matched_beats = beats.len();
    if beats.is_empty() {
        report.status = FoldStatus::Failed {
            reason: "no matched beats".into(),
        };
        return Ok(());
    }
    let c = Columns::of(beats);
    report.sbp = Some(TargetMetrics::compute(&c.true_sbp, &c.pred_sbp)?);
    report.dbp = Some(TargetMetrics::compute(&c.true_dbp, &c.pred_dbp)?);
    report.per_window = window_aggregate(windows)?;
    Ok(())
}

fn run_fold<T: Scalar>(spec: &FoldSpec, cfg: &TrainConfig, seed: u64, opts: &ProtocolOptions) -> Result<FoldOutcome> {
    let train_ids = ids(&spec.train);
    let test_ids = ids(&spec.test);
    let mut report = EvalReport {
        label: spec.label.clone(),
        status: FoldStatus::Ok,
        train_subjects: train_ids.clone(),
        test_subjects: test_ids.clone(),
        train_fraction: spec.train_fraction,
        seed,
        reference_beats: 0,
        predicted_beats: 0,
        matched_beats: 0,
        sbp: None,
        dbp: None,
        per_window: None,
    };
    let prepped = spec
        .train
        .iter()
        .map(|r| preprocess_with(r, &opts.preprocess))
        .collect::<Result<Vec<_>>>()?;
    let (x, y) = training_windows::<T>(&prepped)?;
    if spec.train_fraction.is_none() {
        check_disjoint(&x.provenance, &train_ids, &test_ids)?;
        check_disjoint(&y.provenance, &train_ids, &test_ids)?;
    }
    let fold_cfg = TrainConfig { seed, ..cfg.clone() };
    let mut model = PatModel::<T>::new(&fold_cfg)?;
    info!(
        "{}: training on {} windows from {} subject(s)",
        spec.label,
        x.len(),
        train_ids.len()
    );
    let history = match train(&mut model, &x, &y, &fold_cfg, |m| {
        if m.step % 500 == 0 {
            info!("{}: step {} cycle loss {:.4}", spec.label, m.step, m.loss_cyc);
        }
    }) {
        Ok(h) => h,
        Err(e @ Error::Diverged { .. }) => {
            warn!("{}: {e}", spec.label);
            report.status = FoldStatus::Failed { reason: e.to_string() };
            return Ok(FoldOutcome {
                report,
                beats: Vec::new(),
                window_means: Vec::new(),
                history: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let mut beats = Vec::new();
    let mut window_means = Vec::new();
    for rec in &spec.test {
        let (pairs, windows, n_ref, n_pred) = score_record(&model, rec, opts)?;
        beats.extend(pairs);
        window_means.extend(windows);
        report.reference_beats += n_ref;
        report.predicted_beats += n_pred;
    }
    fill_metrics(&mut report, &beats, &window_means)?;
    if !report.is_ok() {
        warn!("{}: no matched beats", spec.label);
    }
    Ok(FoldOutcome {
        report,
        beats,
        window_means,
        history,
    })
}

/// Trains and scores one model per fold (or per subject), then pools the
/// matched beats of all successful folds into an aggregate report.
///
/// A fold whose training diverges or that yields no matched beats is marked
/// failed and the run continues.
pub fn run_protocol<T: Scalar>(
    records: &[SignalRecord],
    protocol: &Protocol,
    cfg: &TrainConfig,
    opts: &ProtocolOptions,
) -> Result<ProtocolRun> {
    cfg.validate()?;
    opts.beat.validate()?;
    let specs = fold_specs(records, protocol)?;
    let folds = specs
        .iter()
        .enumerate()
        .map(|(k, spec)| run_fold::<T>(spec, cfg, fold_seed(cfg.seed, k), opts))
        .collect::<Result<Vec<_>>>()?;

    let ok: Vec<&FoldOutcome> = folds.iter().filter(|f| f.report.is_ok()).collect();
    let pooled: Vec<BeatPair> = ok.iter().flat_map(|f| f.beats.iter().cloned()).collect();
    let pooled_windows: Vec<[f64; 4]> = ok.iter().flat_map(|f| f.window_means.iter().copied()).collect();
    let mut aggregate = EvalReport {
        label: "aggregate".into(),
        status: FoldStatus::Ok,
        train_subjects: Vec::new(),
        test_subjects: ok.iter().flat_map(|f| f.report.test_subjects.iter().cloned()).collect(),
        train_fraction: match protocol {
            Protocol::PerSubject { train_fraction } => Some(*train_fraction),
            Protocol::CrossSubject { .. } => None,
        },
        seed: cfg.seed,
        reference_beats: ok.iter().map(|f| f.report.reference_beats).sum(),
        predicted_beats: ok.iter().map(|f| f.report.predicted_beats).sum(),
        matched_beats: 0,
        sbp: None,
        dbp: None,
        per_window: None,
    };
    fill_metrics(&mut aggregate, &pooled, &pooled_windows)?;
    if ok.is_empty() {
        aggregate.status = FoldStatus::Failed {
            reason: "every fold failed".into(),
        };
    }
    let report = ProtocolReport {
        meta: ReportMeta {
            protocol: protocol.name().into(),
            seed: cfg.seed,
            config_hash: opts.config_hash.clone(),
            p_value_test: P_VALUE_TEST.into(),
            loa_sd: LOA_SD.into(),
            aggregation: "pooled_matched_beats".into(),
        },
        folds: folds.iter().map(|f| f.report.clone()).collect(),
        aggregate,
    };
    Ok(ProtocolRun { folds, report })
}
