use serde::{Deserialize, Serialize};

use super::PatModel;
use crate::autodiff::Graph;
use crate::dsp::{
    denormalize, fft_filter, normalize, reconstruct_from_windows, segment_windows, FilterBand, NormParams,
    ABP_LOWPASS_HZ, PPG_BAND_HZ,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal_io::SignalRecord;
use crate::WINDOW_LEN;

/// Windows pushed through a generator per graph during inference.
const INFER_CHUNK: usize = 16;

/// A record after filtering and per-channel normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub subject_id: String,
    pub sample_rate_hz: f64,
    /// Band-passed PPG in [-1, 1].
    pub ppg: Vec<f64>,
    pub ppg_norm: NormParams,
    /// Low-passed ABP in [-1, 1].
    pub abp: Vec<f64>,
    pub abp_norm: NormParams,
    /// Low-passed ABP in mmHg, the reference for beat extraction.
    pub abp_filtered: Vec<f64>,
}

/// Filter cutoffs applied before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub ppg_band_hz: (f64, f64),
    pub abp_lowpass_hz: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            ppg_band_hz: PPG_BAND_HZ,
            abp_lowpass_hz: ABP_LOWPASS_HZ,
        }
    }
}

impl PreprocessConfig {
    fn ppg_band(&self) -> FilterBand {
        FilterBand::band_pass(self.ppg_band_hz.0, self.ppg_band_hz.1)
    }

    fn abp_band(&self) -> FilterBand {
        FilterBand::low_pass(self.abp_lowpass_hz)
    }
}

/// [`preprocess_with`] at the default cutoffs: PPG band-passed to 0.1-8 Hz, ABP low-passed at 5 Hz.
pub fn preprocess(record: &SignalRecord) -> Result<Preprocessed> {
    preprocess_with(record, &PreprocessConfig::default())
}

/// Filters both channels and maps each onto [-1, 1].
pub fn preprocess_with(record: &SignalRecord, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    record.require_window()?;
    let fs = record.sample_rate_hz;
    let ppg_f = fft_filter(&record.ppg, fs, cfg.ppg_band())?;
    let abp_filtered = fft_filter(&record.abp, fs, cfg.abp_band())?;
    let (ppg, ppg_norm) = normalize(&ppg_f)?;
    let (abp, abp_norm) = normalize(&abp_filtered)?;
    Ok(Preprocessed {
        subject_id: record.subject_id.clone(),
        sample_rate_hz: fs,
        ppg,
        ppg_norm,
        abp,
        abp_norm,
        abp_filtered,
    })
}

/// Flat pool of training windows, each tagged with its subject and sample offset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSet<T> {
    pub data: Vec<T>,
    pub provenance: Vec<(String, usize)>,
}

impl<T: Scalar> WindowSet<T> {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn window(&self, i: usize) -> &[T] {
        &self.data[i * WINDOW_LEN..(i + 1) * WINDOW_LEN]
    }

    fn extend_from_signal(&mut self, signal: &[f64], norm: NormParams, id: &str) -> Result<()> {
        let batch = segment_windows(signal, norm, id)?;
        self.data.extend(batch.data.iter().map(|&v| T::lit(v)));
        self.provenance
            .extend(batch.offsets.iter().map(|&o| (id.to_string(), o)));
        Ok(())
    }

    /// Distinct subject ids in first-seen order.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for (id, _) in &self.provenance {
            if !seen.contains(&id.as_str()) {
                seen.push(id);
            }
        }
        seen
    }
}

/// PPG windows (domain X) and ABP windows (domain Y) of the given records.
pub fn training_windows<T: Scalar>(records: &[Preprocessed]) -> Result<(WindowSet<T>, WindowSet<T>)> {
    let mut x = WindowSet::default();
    let mut y = WindowSet::default();
    for rec in records {
        x.extend_from_signal(&rec.ppg, rec.ppg_norm, &rec.subject_id)?;
        y.extend_from_signal(&rec.abp, rec.abp_norm, &rec.subject_id)?;
    }
    Ok((x, y))
}

/// Anything that maps normalized PPG windows to normalized ABP windows.
pub trait WindowMap<T> {
    /// `windows` holds `n` concatenated 256-sample windows; the result has the same layout.
    fn map_windows(&self, windows: &[T], n: usize) -> Result<Vec<T>>;
}

impl<T: Scalar> WindowMap<T> for PatModel<T> {
    fn map_windows(&self, windows: &[T], n: usize) -> Result<Vec<T>> {
        if windows.len() != n * WINDOW_LEN {
            return Err(Error::Shape(format!("{} values for {n} windows", windows.len())));
        }
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(INFER_CHUNK * WINDOW_LEN) {
            let mut g = Graph::new();
            let vars = self.g.bind_frozen(&mut g);
            let x = g.constant(vec![chunk.len() / WINDOW_LEN, 1, WINDOW_LEN], chunk.to_vec());
            let y = self.g.forward(&mut g, &vars, x)?;
            out.extend_from_slice(g.value(y));
        }
        Ok(out)
    }
}

/// Passes windows through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl<T: Scalar> WindowMap<T> for IdentityMap {
    fn map_windows(&self, windows: &[T], _n: usize) -> Result<Vec<T>> {
        Ok(windows.to_vec())
    }
}

/// [`translate_with`] at the default cutoffs.
pub fn translate<T: Scalar, M: WindowMap<T>>(
    model: &M,
    ppg_record: &SignalRecord,
    abp_norm: &NormParams,
) -> Result<SignalRecord> {
    translate_with(model, ppg_record, abp_norm, &PreprocessConfig::default())
}

/// Estimates an ABP waveform from a record's PPG channel.
///
/// The PPG is band-passed, normalized, windowed, mapped window by window,
/// crossfaded back together and finally denormalized with `abp_norm`. The
/// returned record covers `last offset + 256` samples; its PPG channel is the
/// input truncated to that length.
pub fn translate_with<T: Scalar, M: WindowMap<T>>(
    model: &M,
    ppg_record: &SignalRecord,
    abp_norm: &NormParams,
    cfg: &PreprocessConfig,
) -> Result<SignalRecord> {
    ppg_record.require_window()?;
    abp_norm.validate()?;
    let filtered = fft_filter(&ppg_record.ppg, ppg_record.sample_rate_hz, cfg.ppg_band())?;
    let (norm, params) = normalize(&filtered)?;
    let cast: Vec<T> = norm.iter().map(|&v| T::lit(v)).collect();
    let batch = segment_windows(&cast, params, &ppg_record.subject_id)?;
    let mapped = model.map_windows(&batch.data, batch.len())?;
    let stitched = reconstruct_from_windows(&batch.with_data(mapped)?)?;
    let abp: Vec<f64> = denormalize(&stitched, abp_norm)?
        .iter()
        .map(|v| v.to_f64_lossy())
        .collect();
    let mut ppg = ppg_record.ppg.clone();
    ppg.truncate(abp.len());
    SignalRecord::new(ppg_record.subject_id.clone(), ppg_record.sample_rate_hz, ppg, abp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::{generate_synthetic_pair, SynthConfig};

    #[test]
    fn identity_translation_is_renormalized_filtered_ppg() {
        let rec = generate_synthetic_pair(3, 2000, &SynthConfig::default()).unwrap();
        let target = NormParams::new(60.0, 160.0).unwrap();
        let out = translate::<f64, _>(&IdentityMap, &rec, &target).unwrap();
        assert_eq!(out.len(), 9 * 192 + 256);
        let filtered = fft_filter(&rec.ppg, rec.sample_rate_hz, PreprocessConfig::default().ppg_band()).unwrap();
        let (norm, _) = normalize(&filtered).unwrap();
        let expect = denormalize(&norm, &target).unwrap();
        for (a, b) in out.abp.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(out.ppg, rec.ppg[..out.len()]);
    }

    #[test]
    fn short_record_rejected() {
        let rec = SignalRecord::new("s", 125.0, vec![0.0; 100], vec![0.0; 100]).unwrap();
        let target = NormParams::new(60.0, 160.0).unwrap();
        assert!(matches!(
            translate::<f64, _>(&IdentityMap, &rec, &target),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn windows_keep_provenance() {
        let cfg = SynthConfig::default();
        let recs: Vec<_> = (0..2)
            .map(|s| preprocess(&generate_synthetic_pair(s, 1000, &cfg).unwrap()).unwrap())
            .collect();
        let (x, y) = training_windows::<f32>(&recs).unwrap();
        assert_eq!(x.len(), 2 * 4);
        assert_eq!(x.provenance, y.provenance);
        assert_eq!(x.subjects(), vec!["synth-0000", "synth-0001"]);
        assert_eq!(x.provenance[5], ("synth-0001".to_string(), 192));
    }
}
