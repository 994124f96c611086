use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn paired(truth: &[f64], pred: &[f64], min_len: usize) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} reference values, {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.len() < min_len {
        return Err(Error::Argument(format!(
            "need at least {min_len} paired values, got {}",
            truth.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean absolute difference.
pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    paired(truth, pred, 1)?;
    Ok(truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / truth.len() as f64)
}

/// Root mean squared difference.
pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    paired(truth, pred, 1)?;
    let ss: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

/// Mean and population standard deviation of `pred - truth`.
pub fn error_mean_sd(truth: &[f64], pred: &[f64]) -> Result<(f64, f64)> {
    paired(truth, pred, 1)?;
    let diffs: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| p - t).collect();
    let mu = mean(&diffs);
    let var = diffs.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / diffs.len() as f64;
    Ok((mu, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    /// Two-sided, from Student's t with n - 2 degrees of freedom.
    pub p_value: f64,
}

/// Product-moment correlation and its two-sided t-test p-value.
pub fn pearson(truth: &[f64], pred: &[f64]) -> Result<Pearson> {
    paired(truth, pred, 3)?;
    let (mt, mp) = (mean(truth), mean(pred));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (t, p) in truth.iter().zip(pred) {
        let (a, b) = (t - mt, p - mp);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(format!(
            "zero variance in {}",
            if sxx == 0.0 { "reference values" } else { "predictions" }
        )));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let dof = (truth.len() - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (dof / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Argument(e.to_string()))?;
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Pearson { r, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BhsGrade {
    A,
    B,
    C,
    #[serde(rename = "fail")]
    Fail,
}

/// Cumulative percentage thresholds (at 5, 10 and 15 mmHg) for grades A, B and C.
pub const BHS_TABLE: [(BhsGrade, [f64; 3]); 3] = [
    (BhsGrade::A, [60.0, 85.0, 95.0]),
    (BhsGrade::B, [50.0, 75.0, 90.0]),
    (BhsGrade::C, [40.0, 65.0, 85.0]),
];

/// Best grade whose three thresholds are all met.
pub fn grade_from_fractions(fractions: [f64; 3]) -> BhsGrade {
    BHS_TABLE
        .iter()
        .find(|(_, need)| fractions.iter().zip(need).all(|(f, n)| f >= n))
        .map_or(BhsGrade::Fail, |(g, _)| *g)
}

/// Percentages of absolute errors at or below 5, 10 and 15 mmHg, and the grade they earn.
pub fn bhs_grade(abs_errors: &[f64]) -> Result<(BhsGrade, [f64; 3])> {
    if abs_errors.is_empty() {
        return Err(Error::Argument("BHS grading needs at least one error".into()));
    }
    if abs_errors.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Argument("absolute errors must be non-negative".into()));
    }
    let n = abs_errors.len() as f64;
    let frac = |lim: f64| 100.0 * abs_errors.iter().filter(|&&e| e <= lim).count() as f64 / n;
    let fractions = [frac(5.0), frac(10.0), frac(15.0)];
    Ok((grade_from_fractions(fractions), fractions))
}

/// Pointwise means and differences with 95% limits of agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub means: Vec<f64>,
    /// `pred - truth`.
    pub diffs: Vec<f64>,
    pub mean_diff: f64,
    pub lower_loa: f64,
    pub upper_loa: f64,
}

/// Limits are `mean_diff ± 1.96 sd`, with the population standard deviation.
pub fn bland_altman(truth: &[f64], pred: &[f64]) -> Result<BlandAltman> {
    paired(truth, pred, 2)?;
    let means = truth.iter().zip(pred).map(|(t, p)| (t + p) / 2.0).collect();
    let diffs: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| p - t).collect();
    let mean_diff = mean(&diffs);
    let sd = (diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
    Ok(BlandAltman {
        means,
        diffs,
        mean_diff,
        lower_loa: mean_diff - 1.96 * sd,
        upper_loa: mean_diff + 1.96 * sd,
    })
}
