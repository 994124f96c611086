use serde::{Deserialize, Serialize};

use super::metrics::{bhs_grade, bland_altman, error_mean_sd, mae, pearson, rmse, BhsGrade};
use crate::error::Result;

/// Name of the significance test behind `p_value`, stored with every report.
pub const P_VALUE_TEST: &str = "student_t_two_sided_n_minus_2";
/// Standard deviation convention used for the limits of agreement.
pub const LOA_SD: &str = "population";

/// Agreement statistics for one target (SBP or DBP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    /// Mean of `pred - truth`.
    pub mu: f64,
    /// Population standard deviation of `pred - truth`.
    pub sigma: f64,
    /// `None` when fewer than three pairs or a constant series.
    pub pearson_r: Option<f64>,
    pub p_value: Option<f64>,
    pub bhs_grade: BhsGrade,
    pub bhs_fractions: [f64; 3],
    /// `(mean_diff, lower_loa, upper_loa)`; `None` for a single pair.
    pub bland_altman: Option<(f64, f64, f64)>,
}

impl TargetMetrics {
    pub fn compute(truth: &[f64], pred: &[f64]) -> Result<Self> {
        let abs: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).collect();
        let (mu, sigma) = error_mean_sd(truth, pred)?;
        let (grade, fractions) = bhs_grade(&abs)?;
        let corr = pearson(truth, pred).ok();
        Ok(TargetMetrics {
            n: truth.len(),
            mae: mae(truth, pred)?,
            rmse: rmse(truth, pred)?,
            mu,
            sigma,
            pearson_r: corr.map(|c| c.r),
            p_value: corr.map(|c| c.p_value),
            bhs_grade: grade,
            bhs_fractions: fractions,
            bland_altman: bland_altman(truth, pred)
                .ok()
                .map(|b| (b.mean_diff, b.lower_loa, b.upper_loa)),
        })
    }
}

/// One matched beat: reference and predicted pressures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatPair {
    pub subject_id: String,
    pub beat_index: usize,
    pub true_sbp: f64,
    pub pred_sbp: f64,
    pub true_dbp: f64,
    pub pred_dbp: f64,
}

/// Paired pressure columns pulled out of a beat list.
#[derive(Debug, Clone, Default)]
pub struct Columns {
    pub true_sbp: Vec<f64>,
    pub pred_sbp: Vec<f64>,
    pub true_dbp: Vec<f64>,
    pub pred_dbp: Vec<f64>,
}

impl Columns {
    pub fn of(pairs: &[BeatPair]) -> Self {
        Columns {
            true_sbp: pairs.iter().map(|b| b.true_sbp).collect(),
            pred_sbp: pairs.iter().map(|b| b.pred_sbp).collect(),
            true_dbp: pairs.iter().map(|b| b.true_dbp).collect(),
            pred_dbp: pairs.iter().map(|b| b.pred_dbp).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum FoldStatus {
    Ok,
    Failed { reason: String },
}

/// Mean absolute error of per-window mean pressures (secondary view).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAggregate {
    pub n_windows: usize,
    pub sbp_mae: f64,
    pub dbp_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub status: FoldStatus,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    /// Set for per-subject splits.
    pub train_fraction: Option<f64>,
    pub seed: u64,
    pub reference_beats: usize,
    pub predicted_beats: usize,
    pub matched_beats: usize,
    pub sbp: Option<TargetMetrics>,
    pub dbp: Option<TargetMetrics>,
    pub per_window: Option<WindowAggregate>,
}

impl EvalReport {
    pub fn is_ok(&self) -> bool {
        self.status == FoldStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    /// `cross_subject` or `per_subject`.
    pub protocol: String,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub p_value_test: String,
    pub loa_sd: String,
    pub aggregation: String,
}

/// Fold reports plus the aggregate over all successful folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub meta: ReportMeta,
    pub folds: Vec<EvalReport>,
    pub aggregate: EvalReport,
}

impl ProtocolReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
