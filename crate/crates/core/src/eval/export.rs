use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::metrics::bland_altman;
use super::protocol::ProtocolRun;
use super::report::{BeatPair, Columns};
use crate::cyclegan::format_loss_history;
use crate::error::{Error, Result};

/// `mean,diff` rows, one per pair.
pub fn bland_altman_csv(truth: &[f64], pred: &[f64]) -> Result<String> {
    let ba = bland_altman(truth, pred)?;
    let mut out = String::from("mean,diff\n");
    for (m, d) in ba.means.iter().zip(&ba.diffs) {
        let _ = writeln!(out, "{m},{d}");
    }
    Ok(out)
}

/// Histogram of signed errors `pred - truth` as `bin_start,bin_end,count` rows.
///
/// Bins are `[k w, (k + 1) w)` and span the smallest to the largest error.
pub fn error_histogram_csv(truth: &[f64], pred: &[f64], bin_width: f64) -> Result<String> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Argument(format!("bin width must be positive, got {bin_width}")));
    }
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Argument("histogram needs equal, non-empty columns".into()));
    }
    let bins: Vec<i64> = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| ((p - t) / bin_width).floor() as i64)
        .collect();
    let lo = *bins.iter().min().expect("non-empty");
    let hi = *bins.iter().max().expect("non-empty");
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for b in bins {
        counts[(b - lo) as usize] += 1;
    }
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in counts.iter().enumerate() {
        let start = (lo + i as i64) as f64 * bin_width;
        let _ = writeln!(out, "{start},{},{c}", start + bin_width);
    }
    Ok(out)
}

fn beats_csv(beats: &[BeatPair]) -> String {
    let mut out = String::from("subject_id,beat_index,true_sbp,pred_sbp,true_dbp,pred_dbp\n");
    for b in beats {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            b.subject_id, b.beat_index, b.true_sbp, b.pred_sbp, b.true_dbp, b.pred_dbp
        );
    }
    out
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_target_csvs(dir: &Path, label: &str, beats: &[BeatPair]) -> Result<()> {
    write(dir, &format!("{label}_beats.csv"), &beats_csv(beats))?;
    let c = Columns::of(beats);
    for (target, truth, pred) in [("sbp", &c.true_sbp, &c.pred_sbp), ("dbp", &c.true_dbp, &c.pred_dbp)] {
        if truth.len() >= 2 {
            write(dir, &format!("{label}_{target}_bland_altman.csv"), &bland_altman_csv(truth, pred)?)?;
        }
        if !truth.is_empty() {
            write(dir, &format!("{label}_{target}_errors.csv"), &error_histogram_csv(truth, pred, 1.0)?)?;
        }
    }
    Ok(())
}

/// Writes `report.json` plus beat, Bland-Altman, error-histogram and loss CSVs
/// for every fold and the aggregate.
pub fn write_protocol_outputs(dir: impl AsRef<Path>, run: &ProtocolRun) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "report.json", &run.report.to_json()?)?;
    let mut pooled = Vec::new();
    for fold in &run.folds {
        let label = &fold.report.label;
        write_target_csvs(dir, label, &fold.beats)?;
        write(dir, &format!("{label}_loss.csv"), &format_loss_history(&fold.history))?;
        if fold.report.is_ok() {
            pooled.extend(fold.beats.iter().cloned());
        }
    }
    write_target_csvs(dir, "aggregate", &pooled)
}
