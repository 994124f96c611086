use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pass band of a brick-wall frequency mask. `None` leaves that side open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterBand {
    pub low_hz: Option<f64>,
    pub high_hz: Option<f64>,
}

impl FilterBand {
    pub fn band_pass(low_hz: f64, high_hz: f64) -> Self {
        FilterBand {
            low_hz: Some(low_hz),
            high_hz: Some(high_hz),
        }
    }

    pub fn low_pass(high_hz: f64) -> Self {
        FilterBand {
            low_hz: None,
            high_hz: Some(high_hz),
        }
    }

    pub fn high_pass(low_hz: f64) -> Self {
        FilterBand {
            low_hz: Some(low_hz),
            high_hz: None,
        }
    }

    fn validate(&self, fs: f64) -> Result<()> {
        let nyquist = fs / 2.0;
        if self.low_hz.is_none() && self.high_hz.is_none() {
            return Err(Error::Argument("filter needs at least one cutoff".into()));
        }
        for cut in [self.low_hz, self.high_hz].into_iter().flatten() {
            if !(cut.is_finite() && cut >= 0.0) {
                return Err(Error::Argument(format!("cutoff {cut} Hz must be non-negative")));
            }
            if cut >= nyquist {
                return Err(Error::Argument(format!(
                    "cutoff {cut} Hz is at or above the Nyquist frequency {nyquist} Hz"
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.low_hz, self.high_hz) {
            if lo > hi {
                return Err(Error::Argument(format!("low cutoff {lo} Hz above high cutoff {hi} Hz")));
            }
        }
        Ok(())
    }

    /// Whether a bin at `freq` Hz survives the mask.
    fn passes(&self, freq: f64) -> bool {
        self.low_hz.is_none_or(|lo| freq >= lo) && self.high_hz.is_none_or(|hi| freq <= hi)
    }
}

/// Zeroes every FFT bin whose frequency lies outside the band, then inverts.
///
/// Bin `k` and its conjugate `n - k` share a frequency and are always kept or
/// dropped together, so a real input stays real.
pub fn fft_filter<T: Scalar>(signal: &[T], fs: f64, band: FilterBand) -> Result<Vec<T>> {
    if signal.len() < 2 {
        return Err(Error::Argument(format!(
            "filter needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Argument(format!("sample rate must be positive, got {fs}")));
    }
    band.validate(fs)?;

    let n = signal.len();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex<T>> = signal.iter().map(|&x| Complex::new(x, T::zero())).collect();
    forward.process(&mut buf);
    for k in 0..=n / 2 {
        let freq = k as f64 * fs / n as f64;
        if !band.passes(freq) {
            buf[k] = Complex::new(T::zero(), T::zero());
            buf[(n - k) % n] = Complex::new(T::zero(), T::zero());
        }
    }
    inverse.process(&mut buf);
    let scale = T::one() / T::lit(n as f64);
    Ok(buf.into_iter().map(|c| c.re * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sine(freq: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (TAU * freq * i as f64 / fs).sin()).collect()
    }

    fn peak(x: &[f64]) -> f64 {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn band_pass_keeps_one_hertz() {
        let x = sine(1.0, 1250, 125.0);
        let y = fft_filter(&x, 125.0, FilterBand::band_pass(0.1, 8.0)).unwrap();
        assert_eq!(y.len(), x.len());
        assert!((peak(&y) - 1.0).abs() < 0.01);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn low_pass_removes_twenty_hertz() {
        let x = sine(20.0, 1250, 125.0);
        let y = fft_filter(&x, 125.0, FilterBand::low_pass(5.0)).unwrap();
        assert!(peak(&y) < 0.01);
    }

    #[test]
    fn band_pass_removes_dc() {
        let x: Vec<f64> = sine(1.0, 1000, 125.0).iter().map(|v| v + 3.0).collect();
        let y = fft_filter(&x, 125.0, FilterBand::band_pass(0.1, 8.0)).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn zero_in_zero_out() {
        let y = fft_filter(&[0.0f64; 512], 125.0, FilterBand::band_pass(0.1, 8.0)).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn argument_errors() {
        let x = sine(1.0, 64, 125.0);
        assert!(fft_filter(&x, 125.0, FilterBand { low_hz: None, high_hz: None }).is_err());
        assert!(fft_filter(&x, 125.0, FilterBand::low_pass(62.5)).is_err());
        assert!(fft_filter(&x, 125.0, FilterBand::high_pass(70.0)).is_err());
        assert!(fft_filter(&[1.0f64], 125.0, FilterBand::low_pass(5.0)).is_err());
    }

    #[test]
    fn idempotent_and_real() {
        let x: Vec<f64> = (0..777).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let band = FilterBand::band_pass(0.1, 8.0);
        let once = fft_filter(&x, 125.0, band).unwrap();
        let twice = fft_filter(&once, 125.0, band).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = sine(1.0, 1250, 125.0).into_iter().map(|v| v as f32).collect();
        let y = fft_filter(&x, 125.0, FilterBand::band_pass(0.1, 8.0)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
