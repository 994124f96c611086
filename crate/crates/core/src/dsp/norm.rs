use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Affine min-max range of a signal, kept so normalized values can be mapped back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min_val: f64,
    pub max_val: f64,
}

impl NormParams {
    pub fn new(min_val: f64, max_val: f64) -> Result<Self> {
        let p = NormParams { min_val, max_val };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_val.is_finite() && self.max_val.is_finite()) {
            return Err(Error::Validation(format!("non-finite normalization range {self:?}")));
        }
        if self.max_val <= self.min_val {
            return Err(Error::DegenerateRange(self.min_val));
        }
        Ok(())
    }

    /// Range of a signal, failing on empty or constant input.
    pub fn fit<T: Scalar>(signal: &[T]) -> Result<Self> {
        if signal.is_empty() {
            return Err(Error::Argument("cannot normalize an empty signal".into()));
        }
        let (lo, hi) = signal.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let v = v.to_f64_lossy();
            (lo.min(v), hi.max(v))
        });
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Validation("signal contains non-finite samples".into()));
        }
        if hi <= lo {
            return Err(Error::DegenerateRange(lo));
        }
        Ok(NormParams { min_val: lo, max_val: hi })
    }

    pub fn span(&self) -> f64 {
        self.max_val - self.min_val
    }
}

/// Maps the signal affinely onto [-1, 1].
pub fn normalize<T: Scalar>(signal: &[T]) -> Result<(Vec<T>, NormParams)> {
    let params = NormParams::fit(signal)?;
    let (lo, span) = (T::lit(params.min_val), T::lit(params.span()));
    let two = T::lit(2.0);
    let out = signal
        .iter()
        .map(|&v| (two * (v - lo) / span - T::one()).max(-T::one()).min(T::one()))
        .collect();
    Ok((out, params))
}

/// Exact affine inverse of [`normalize`].
pub fn denormalize<T: Scalar>(signal: &[T], params: &NormParams) -> Result<Vec<T>> {
    params.validate()?;
    let (lo, span) = (T::lit(params.min_val), T::lit(params.span()));
    let half = T::lit(0.5);
    Ok(signal.iter().map(|&v| lo + (v + T::one()) * half * span).collect())
}
