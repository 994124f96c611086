//! Paired PPG/ABP records: loading, writing, synthesis and subject-disjoint splits.

mod folds;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::WINDOW_LEN;

pub use folds::{make_folds, FoldPlan};
pub use synth::{generate_synthetic_pair, SynthConfig};

/// Sample rate of the MIMIC-II waveform exports this toolkit targets.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 125.0;

/// One subject's paired PPG (arbitrary units) and ABP (mmHg) channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub subject_id: String,
    pub sample_rate_hz: f64,
    pub ppg: Vec<f64>,
    pub abp: Vec<f64>,
}

impl SignalRecord {
    /// Builds a record, checking that both channels have the same length and the rate is positive.
    pub fn new(subject_id: impl Into<String>, sample_rate_hz: f64, ppg: Vec<f64>, abp: Vec<f64>) -> Result<Self> {
        let rec = SignalRecord {
            subject_id: subject_id.into(),
            sample_rate_hz,
            ppg,
            abp,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.ppg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.ppg.len() != self.abp.len() {
            return Err(Error::Validation(format!(
                "record {}: ppg has {} samples but abp has {}",
                self.subject_id,
                self.ppg.len(),
                self.abp.len()
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "record {}: sample rate must be positive, got {}",
                self.subject_id, self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Errors unless the record holds at least one full analysis window.
    pub fn require_window(&self) -> Result<()> {
        if self.len() < WINDOW_LEN {
            return Err(Error::Argument(format!(
                "record {} has {} samples, fewer than one {WINDOW_LEN}-sample window",
                self.subject_id,
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Required sample rate; `None` accepts any positive rate.
    pub required_rate_hz: Option<f64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            required_rate_hz: Some(DEFAULT_SAMPLE_RATE_HZ),
        }
    }
}

/// Loads a record file and enforces the 125 Hz protocol rate.
pub fn load_record(path: impl AsRef<Path>) -> Result<SignalRecord> {
    load_record_with(path, LoadOptions::default())
}

pub fn load_record_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<SignalRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record(&text, opts)
}

/// Parses the CSV record format:
///
/// ```text
/// # subject=<id>
/// # fs=125
/// ppg,abp            (optional column row)
/// 0.512,84.2
/// ```
///
/// A blank field ends that channel; the channels must end up the same length.
pub fn parse_record(text: &str, opts: LoadOptions) -> Result<SignalRecord> {
    let mut subject = None;
    let mut fs_hz = None;
    let mut ppg = Vec::new();
    let mut abp = Vec::new();
    let mut ppg_done = false;
    let mut abp_done = false;
    let mut saw_any = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        saw_any = true;
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            let Some((key, value)) = meta.split_once('=') else {
                continue;
            };
            match key.trim() {
                "subject" => subject = Some(value.trim().to_string()),
                "fs" => {
                    let v: f64 = value.trim().parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("field `fs`: `{}` is not a number", value.trim()),
                    })?;
                    fs_hz = Some(v);
                }
                _ => {}
            }
            continue;
        }
        if line.eq_ignore_ascii_case("ppg,abp") {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected exactly two comma-separated fields `ppg,abp`".into(),
            });
        };
        push_field(a, "ppg", line_no, &mut ppg, &mut ppg_done)?;
        push_field(b, "abp", line_no, &mut abp, &mut abp_done)?;
    }

    if !saw_any {
        return Err(Error::Parse {
            line: 0,
            msg: "empty file".into(),
        });
    }
    let subject = subject.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing `# subject=<id>` header".into(),
    })?;
    let fs_hz = fs_hz.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing `# fs=<hz>` header".into(),
    })?;
    if ppg.is_empty() && abp.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no sample rows".into(),
        });
    }
    if let Some(req) = opts.required_rate_hz {
        if fs_hz != req {
            return Err(Error::Validation(format!(
                "record {subject}: sample rate {fs_hz} Hz, expected {req} Hz"
            )));
        }
    }
    SignalRecord::new(subject, fs_hz, ppg, abp)
}

fn push_field(field: &str, name: &str, line: usize, out: &mut Vec<f64>, done: &mut bool) -> Result<()> {
    let field = field.trim();
    if field.is_empty() {
        *done = true;
        return Ok(());
    }
    if *done {
        return Err(Error::Parse {
            line,
            msg: format!("field `{name}`: value after the channel ended"),
        });
    }
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("field `{name}`: `{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("field `{name}`: non-finite value"),
        });
    }
    out.push(v);
    Ok(())
}

/// Renders a record in the CSV format accepted by [`parse_record`]. Values round-trip exactly.
pub fn format_record(rec: &SignalRecord) -> String {
    let mut s = String::with_capacity(rec.len() * 24 + 64);
    let _ = writeln!(s, "# subject={}", rec.subject_id);
    let _ = writeln!(s, "# fs={}", rec.sample_rate_hz);
    s.push_str("ppg,abp\n");
    for (p, a) in rec.ppg.iter().zip(&rec.abp) {
        let _ = writeln!(s, "{p},{a}");
    }
    s
}

pub fn write_record(path: impl AsRef<Path>, rec: &SignalRecord) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_record(rec)).map_err(|e| Error::io(path, e))
}

/// Temporal prefix/suffix split used by the per-subject protocol. No shuffling.
pub fn split_per_subject(record: &SignalRecord, train_fraction: f64) -> Result<(SignalRecord, SignalRecord)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = record.len();
    let cut = (n as f64 * train_fraction).round() as usize;
    if cut < WINDOW_LEN || n - cut < WINDOW_LEN {
        return Err(Error::Argument(format!(
            "splitting {n} samples at {train_fraction} gives parts of {cut} and {}; both must hold a {WINDOW_LEN}-sample window",
            n - cut
        )));
    }
    let part = |range: std::ops::Range<usize>| SignalRecord {
        subject_id: record.subject_id.clone(),
        sample_rate_hz: record.sample_rate_hz,
        ppg: record.ppg[range.clone()].to_vec(),
        abp: record.abp[range].to_vec(),
    };
    Ok((part(0..cut), part(cut..n)))
}
