//! Per-beat systolic and diastolic values from an arterial-pressure-like waveform.
//!
//! Beats are located as local maxima that clear an adaptive threshold
//! (rolling median plus a fraction of the rolling max-to-median range) and
//! respect a minimum spacing. Each beat's diastolic value is the trough that
//! follows its peak.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peak detection and beat alignment settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeatConfig {
    /// Span of the centred rolling window used for the threshold, in seconds.
    pub median_window_s: f64,
    /// Fraction of the rolling (max - median) range added to the median.
    pub range_fraction: f64,
    /// Smallest allowed spacing between accepted peaks, in seconds.
    pub min_gap_s: f64,
    /// Largest peak offset accepted when pairing two beat series, in seconds.
    pub align_tolerance_s: f64,
}

impl Default for BeatConfig {
    fn default() -> Self {
        BeatConfig {
            median_window_s: 2.0,
            range_fraction: 0.5,
            min_gap_s: 0.33,
            align_tolerance_s: 0.25,
        }
    }
}

impl BeatConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.median_window_s > 0.0
            && (0.0..1.0).contains(&self.range_fraction)
            && self.min_gap_s > 0.0
            && self.align_tolerance_s >= 0.0
            && [self.median_window_s, self.min_gap_s, self.align_tolerance_s]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid beat config {self:?}")))
        }
    }

    fn samples(secs: f64, fs: f64) -> usize {
        ((secs * fs).round() as usize).max(1)
    }
}

/// Per-beat pressures with the sample index of each systolic peak.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BeatSeries {
    pub sbp: Vec<f64>,
    pub dbp: Vec<f64>,
    pub beat_indices: Vec<usize>,
}

impl BeatSeries {
    pub fn len(&self) -> usize {
        self.beat_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat_indices.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("beat_index,sbp,dbp\n");
        for ((i, s), d) in self.beat_indices.iter().zip(&self.sbp).zip(&self.dbp) {
            let _ = writeln!(out, "{i},{s},{d}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn check_fs(fs: f64) -> Result<()> {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("sample rate must be positive, got {fs}")))
    }
}

/// Systolic peak indices with the default [`BeatConfig`].
pub fn detect_beats(abp: &[f64], fs: f64) -> Result<Vec<usize>> {
    detect_beats_with(abp, fs, &BeatConfig::default())
}

/// Systolic peak indices, strictly increasing and at least `min_gap_s` apart.
///
/// Flat or beat-free input yields an empty list. When two candidates are
/// closer than the gap the taller one wins.
pub fn detect_beats_with(abp: &[f64], fs: f64, cfg: &BeatConfig) -> Result<Vec<usize>> {
    check_fs(fs)?;
    cfg.validate()?;
    if abp.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("waveform contains non-finite samples".into()));
    }
    let n = abp.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let half = BeatConfig::samples(cfg.median_window_s, fs) / 2;
    let mut scratch = Vec::with_capacity(2 * half + 1);
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if abp[i] > abp[i - 1] {
            // walk to the end of a plateau; keep it only if the signal then falls
            let mut j = i;
            while j + 1 < n && abp[j + 1] == abp[i] {
                j += 1;
            }
            if j + 1 < n && abp[j + 1] < abp[i] {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                scratch.clear();
                scratch.extend_from_slice(&abp[lo..hi]);
                scratch.sort_by(f64::total_cmp);
                let median = scratch[scratch.len() / 2];
                let max = scratch[scratch.len() - 1];
                if abp[i] > median + cfg.range_fraction * (max - median) {
                    candidates.push(i);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    candidates.sort_by(|&a, &b| abp[b].total_cmp(&abp[a]).then(a.cmp(&b)));
    let gap = BeatConfig::samples(cfg.min_gap_s, fs);
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        let pos = accepted.partition_point(|&a| a < c);
        let clear_left = pos == 0 || c - accepted[pos - 1] >= gap;
        let clear_right = pos == accepted.len() || accepted[pos] - c >= gap;
        if clear_left && clear_right {
            accepted.insert(pos, c);
        }
    }
    Ok(accepted)
}

/// Reads SBP at each peak and DBP as the minimum from that peak up to the next
/// one (the last beat runs to the end of the signal).
///
/// Beats whose trough is not strictly below the peak are dropped, so every
/// returned beat has `sbp > dbp`.
pub fn extract_sbp_dbp(abp: &[f64], beat_indices: &[usize]) -> Result<BeatSeries> {
    if let Some(&bad) = beat_indices.iter().find(|&&i| i >= abp.len()) {
        return Err(Error::Argument(format!(
            "beat index {bad} outside a signal of {} samples",
            abp.len()
        )));
    }
    if beat_indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("beat indices must be strictly increasing".into()));
    }
    let mut out = BeatSeries::default();
    for (k, &i) in beat_indices.iter().enumerate() {
        let end = beat_indices.get(k + 1).copied().unwrap_or(abp.len());
        let sbp = abp[i];
        let dbp = abp[i..end].iter().copied().fold(f64::INFINITY, f64::min);
        if sbp > dbp {
            out.beat_indices.push(i);
            out.sbp.push(sbp);
            out.dbp.push(dbp);
        }
    }
    Ok(out)
}

/// Pairs beats of two series whose peaks lie within `tolerance_s` of each other.
///
/// Candidate pairs are taken closest first, each beat used at most once. The
/// result lists `(reference_beat, predicted_beat)` positions in increasing order.
pub fn align_beats_with(
    reference: &BeatSeries,
    predicted: &BeatSeries,
    fs: f64,
    tolerance_s: f64,
) -> Result<Vec<(usize, usize)>> {
    check_fs(fs)?;
    let tol = (tolerance_s * fs).round() as usize;
    let mut cand = Vec::new();
    let mut start = 0;
    for (a, &ia) in reference.beat_indices.iter().enumerate() {
        while start < predicted.len() && predicted.beat_indices[start] + tol < ia {
            start += 1;
        }
        for (b, &ib) in predicted.beat_indices.iter().enumerate().skip(start) {
            if ib > ia + tol {
                break;
            }
            cand.push((ia.abs_diff(ib), a, b));
        }
    }
    cand.sort_unstable();
    let mut used_a = vec![false; reference.len()];
    let mut used_b = vec![false; predicted.len()];
    let mut pairs = Vec::new();
    for (_, a, b) in cand {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            pairs.push((a, b));
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// [`align_beats_with`] at the default tolerance.
pub fn align_beats(reference: &BeatSeries, predicted: &BeatSeries, fs: f64) -> Result<Vec<(usize, usize)>> {
    align_beats_with(reference, predicted, fs, BeatConfig::default().align_tolerance_s)
}
