//! Desk-scale stand-in for exported waveform records.
//!
//! Both channels are driven by one beat train. The PPG is the raw pulse shape
//! (fundamental plus a dicrotic harmonic) and the ABP is a fixed monotone
//! saturating map of the same pulse, so the PPG to ABP relation is learnable.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SignalRecord, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::WINDOW_LEN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    /// Per-subject heart rate is drawn uniformly from this range (Hz).
    pub heart_rate_hz: (f64, f64),
    /// Relative beat-to-beat period jitter.
    pub period_jitter: f64,
    /// Relative beat-to-beat amplitude jitter.
    pub amplitude_jitter: f64,
    /// Dicrotic harmonic amplitude relative to the fundamental.
    pub harmonic_ratio: f64,
    pub harmonic_phase: f64,
    /// Per-subject systolic ceiling drawn from this range (mmHg).
    pub systolic_mmhg: (f64, f64),
    /// Per-subject diastolic floor drawn from this range (mmHg).
    pub diastolic_mmhg: (f64, f64),
    /// Bounds every generated ABP sample must respect.
    pub abp_bounds_mmhg: (f64, f64),
    /// Curvature of the pulse to pressure map; 0 would be linear.
    pub map_curvature: f64,
    pub ppg_offset: f64,
    pub ppg_gain: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            heart_rate_hz: (1.0, 1.4),
            period_jitter: 0.03,
            amplitude_jitter: 0.12,
            harmonic_ratio: 0.35,
            harmonic_phase: 0.9,
            systolic_mmhg: (115.0, 150.0),
            diastolic_mmhg: (65.0, 85.0),
            abp_bounds_mmhg: (60.0, 160.0),
            map_curvature: 1.2,
            ppg_offset: 1.5,
            ppg_gain: 1.0,
        }
    }
}

impl SynthConfig {
    /// Default waveform family with constant beat amplitude within a subject.
    pub fn steady() -> Self {
        SynthConfig {
            amplitude_jitter: 0.0,
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        let (floor, ceil) = self.abp_bounds_mmhg;
        if !(self.sample_rate_hz > 0.0)
            || !range_ok(self.heart_rate_hz)
            || self.heart_rate_hz.0 <= 0.0
            || self.heart_rate_hz.1 >= self.sample_rate_hz / 2.0
            || !range_ok(self.systolic_mmhg)
            || !range_ok(self.diastolic_mmhg)
            || !range_ok(self.abp_bounds_mmhg)
            || !(0.0..1.0).contains(&self.period_jitter)
            || !(0.0..1.0).contains(&self.amplitude_jitter)
            || self.map_curvature < 0.0
        {
            return Err(Error::Argument(format!("invalid synthetic config {self:?}")));
        }
        if self.diastolic_mmhg.0 < floor || self.systolic_mmhg.1 > ceil || self.diastolic_mmhg.1 >= self.systolic_mmhg.0 {
            return Err(Error::Argument(format!(
                "pressure ranges must satisfy {floor} <= diastolic < systolic <= {ceil}"
            )));
        }
        Ok(())
    }
}

/// Pulse shape over one beat, shifted so the trough sits at phase 0 and scaled to [0, 1].
struct PulseShape {
    ratio: f64,
    phase: f64,
    trough: f64,
    lo: f64,
    hi: f64,
}

impl PulseShape {
    fn new(ratio: f64, phase: f64) -> Self {
        let raw = |t: f64| t.sin() + ratio * (2.0 * t + phase).sin();
        let n = 4096;
        let (mut lo, mut hi, mut trough) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let v = raw(t);
            if v < lo {
                lo = v;
                trough = t;
            }
            hi = hi.max(v);
        }
        PulseShape { ratio, phase, trough, lo, hi }
    }

    fn eval(&self, theta: f64) -> f64 {
        let t = theta + self.trough;
        let v = t.sin() + self.ratio * (2.0 * t + self.phase).sin();
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// Deterministic synthetic subject: a pure function of `(seed, n_samples, config)`.
pub fn generate_synthetic_pair(seed: u64, n_samples: usize, config: &SynthConfig) -> Result<SignalRecord> {
    if n_samples < WINDOW_LEN {
        return Err(Error::Argument(format!(
            "need at least {WINDOW_LEN} samples, got {n_samples}"
        )));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = config.sample_rate_hz;
    let hr = uniform(&mut rng, config.heart_rate_hz);
    let sbp = uniform(&mut rng, config.systolic_mmhg);
    let dbp = uniform(&mut rng, config.diastolic_mmhg);
    let shape = PulseShape::new(config.harmonic_ratio, config.harmonic_phase);
    let amp_max = 1.0 + config.amplitude_jitter;
    let kappa = config.map_curvature;
    let pressure_map = |u: f64| {
        if kappa == 0.0 {
            u
        } else {
            (1.0 - (-kappa * u).exp()) / (1.0 - (-kappa).exp())
        }
    };

    let mut ppg = Vec::with_capacity(n_samples);
    let mut abp = Vec::with_capacity(n_samples);
    // random start phase so records do not all begin at a trough
    let mut beat_start = -rng.random::<f64>() / hr;
    let mut period = beat_period(&mut rng, hr, config.period_jitter);
    let mut amp = beat_amplitude(&mut rng, config.amplitude_jitter);
    for i in 0..n_samples {
        let t = i as f64 / fs;
        while t >= beat_start + period {
            beat_start += period;
            period = beat_period(&mut rng, hr, config.period_jitter);
            amp = beat_amplitude(&mut rng, config.amplitude_jitter);
        }
        let theta = TAU * (t - beat_start) / period;
        let pulse = amp * shape.eval(theta);
        ppg.push(config.ppg_offset + config.ppg_gain * pulse);
        abp.push(dbp + (sbp - dbp) * pressure_map(pulse / amp_max));
    }
    SignalRecord::new(format!("synth-{seed:04}"), fs, ppg, abp)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn beat_period(rng: &mut ChaCha8Rng, hr: f64, jitter: f64) -> f64 {
    (1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0)) / hr
}

fn beat_amplitude(rng: &mut ChaCha8Rng, jitter: f64) -> f64 {
    1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0)
}
