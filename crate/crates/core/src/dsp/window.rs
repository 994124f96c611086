use serde::{Deserialize, Serialize};

use super::NormParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::{HOP_LEN, WINDOW_LEN};

/// Fixed-length overlapping segments of one normalized signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowBatch<T> {
    /// Row-major `[n_windows x WINDOW_LEN]`.
    pub data: Vec<T>,
    pub offsets: Vec<usize>,
    pub source_id: String,
    pub norm: NormParams,
}

impl<T: Scalar> WindowBatch<T> {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn window(&self, i: usize) -> &[T] {
        &self.data[i * WINDOW_LEN..(i + 1) * WINDOW_LEN]
    }

    /// Same offsets and provenance with the window contents replaced.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "replacement window data has {} values, expected {}",
                data.len(),
                self.data.len()
            )));
        }
        Ok(WindowBatch {
            data,
            offsets: self.offsets.clone(),
            source_id: self.source_id.clone(),
            norm: self.norm,
        })
    }

    /// Samples covered by the windows: `last offset + WINDOW_LEN`.
    pub fn covered_len(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + WINDOW_LEN)
    }
}

/// `floor((len - 256) / 192) + 1`, or 0 for signals shorter than a window.
pub fn window_count(len: usize) -> usize {
    if len < WINDOW_LEN {
        0
    } else {
        (len - WINDOW_LEN) / HOP_LEN + 1
    }
}

/// Cuts a normalized signal into 256-sample windows at hop 192, dropping the ragged tail.
pub fn segment_windows<T: Scalar>(signal: &[T], norm: NormParams, source_id: &str) -> Result<WindowBatch<T>> {
    let n = window_count(signal.len());
    if n == 0 {
        return Err(Error::Argument(format!(
            "signal of {} samples is shorter than one {WINDOW_LEN}-sample window",
            signal.len()
        )));
    }
    norm.validate()?;
    let offsets: Vec<usize> = (0..n).map(|i| i * HOP_LEN).collect();
    let mut data = Vec::with_capacity(n * WINDOW_LEN);
    for &o in &offsets {
        data.extend_from_slice(&signal[o..o + WINDOW_LEN]);
    }
    Ok(WindowBatch {
        data,
        offsets,
        source_id: source_id.to_string(),
        norm,
    })
}

/// Crossfade weight of the incoming window at position `j` of the overlap.
fn fade_in<T: Scalar>(j: usize, overlap: usize) -> T {
    T::lit((j as f64 + 0.5) / overlap as f64)
}

/// Stitches windows back into one signal, linearly crossfading each 64-sample overlap.
pub fn reconstruct_from_windows<T: Scalar>(batch: &WindowBatch<T>) -> Result<Vec<T>> {
    if batch.is_empty() {
        return Err(Error::Argument("cannot reconstruct from an empty batch".into()));
    }
    if batch.data.len() != batch.len() * WINDOW_LEN {
        return Err(Error::Shape(format!(
            "{} offsets but {} samples of window data",
            batch.len(),
            batch.data.len()
        )));
    }
    for (i, pair) in batch.offsets.windows(2).enumerate() {
        if pair[1] != pair[0] + HOP_LEN {
            return Err(Error::Validation(format!(
                "windows {i} and {} are {} samples apart, expected hop {HOP_LEN}",
                i + 1,
                pair[1] as isize - pair[0] as isize
            )));
        }
    }
    let overlap = WINDOW_LEN - HOP_LEN;
    let base = batch.offsets[0];
    let mut out = vec![T::zero(); batch.covered_len() - base];
    for (i, &o) in batch.offsets.iter().enumerate() {
        let w = batch.window(i);
        let start = o - base;
        let first = i == 0;
        let last = i + 1 == batch.len();
        for (j, &v) in w.iter().enumerate() {
            let weight = if !first && j < overlap {
                fade_in::<T>(j, overlap)
            } else if !last && j >= HOP_LEN {
                T::one() - fade_in::<T>(j - HOP_LEN, overlap)
            } else {
                T::one()
            };
            out[start + j] += weight * v;
        }
    }
    Ok(out)
}
