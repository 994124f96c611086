use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_params(params: &ParamSet<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|(_, t)| vec![T::zero(); t.numel()]).collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update using the gradients stored on each tensor.
pub fn optimizer_step<T: Scalar>(params: &mut ParamSet<T>, state: &mut AdamState<T>, cfg: &Adam) -> Result<()> {
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Usage(format!(
            "optimizer state tracks {} tensors, parameter set has {}",
            state.m.len(),
            params.len()
        )));
    }
    if let Some((name, _)) = params.iter().find(|(_, t)| t.requires_grad() && t.grad().is_none()) {
        return Err(Error::Usage(format!("parameter {name} has no gradient; run backward first")));
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let bc1 = T::lit(1.0 - cfg.beta1.powf(t));
    let bc2 = T::lit(1.0 - cfg.beta2.powf(t));
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for ((tensor, m), v) in params.tensors_mut().zip(&mut state.m).zip(&mut state.v) {
        if !tensor.requires_grad() {
            continue;
        }
        let grad = tensor.grad().expect("checked above").to_vec();
        for (i, w) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[i];
            m[i] = b1 * m[i] + (T::one() - b1) * g;
            v[i] = b2 * v[i] + (T::one() - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn single(value: f64, grad: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.push("w", Tensor::scalar(value));
        p.get_mut("w").unwrap().accumulate_grad(&[grad]).unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = single(0.7, 0.0);
        let mut s = AdamState::for_params(&p);
        optimizer_step(&mut p, &mut s, &Adam::default()).unwrap();
        assert_eq!(p.get("w").unwrap().data()[0], 0.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = Adam {
            lr: 0.01,
            ..Adam::default()
        };
        let mut p = single(1.0, 1.0);
        let mut s = AdamState::for_params(&p);
        optimizer_step(&mut p, &mut s, &cfg).unwrap();
        // m_hat = 1, v_hat = 1, step = lr / (1 + eps)
        let expected = 1.0 - 0.01 / (1.0 + 1e-8);
        assert!((p.get("w").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn missing_grad_is_usage_error() {
        let mut p = ParamSet::<f64>::new();
        p.push("w", Tensor::scalar(1.0));
        let mut s = AdamState::for_params(&p);
        assert!(matches!(optimizer_step(&mut p, &mut s, &Adam::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = single(0.3, 0.25);
            let mut s = AdamState::for_params(&p);
            for _ in 0..5 {
                optimizer_step(&mut p, &mut s, &Adam::default()).unwrap();
            }
            p.get("w").unwrap().data()[0].to_bits()
        };
        assert_eq!(run(), run());
    }
}
