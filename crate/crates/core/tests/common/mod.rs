#![allow(dead_code)]

pub mod suites;

use pulsegan::autodiff::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in [-1, 1] kept at least `gap` away from zero.
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
            if v.abs() >= gap {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap().with_requires_grad(true)
}

/// Builds `sum(out * weights)` for a fixed random weighting so every output
/// element contributes a distinct amount to the scalar.
pub fn weighted_sum(g: &mut Graph<f64>, out: Var, seed: u64) -> Var {
    let mut r = rng(seed);
    let n = g.value(out).len();
    let w: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    let shape = g.shape(out).to_vec();
    let wv = g.constant(shape, w);
    let prod = g.mul(out, wv).unwrap();
    g.sum(prod)
}

/// Central-difference gradient check. Returns the worst relative error
/// `||analytic - numeric|| / max(||analytic||, ||numeric||)` over the inputs.
pub fn gradcheck<F>(inputs: &[Tensor<f64>], build: F, h: f64) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let eval = |ts: &[Tensor<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.leaf(t)).collect();
        let loss = build(&mut g, &vars);
        g.item(loss)
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t)).collect();
    let loss = build(&mut g, &vars);
    let grads = g.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (i, t) in inputs.iter().enumerate() {
        let analytic: Vec<f64> = grads
            .get(vars[i])
            .map(|s| s.to_vec())
            .unwrap_or_else(|| vec![0.0; t.numel()]);
        let mut numeric = vec![0.0; t.numel()];
        for j in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            numeric[j] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let denom = na.max(nn);
        let rel = if denom == 0.0 { 0.0 } else { diff / denom };
        worst = worst.max(rel);
    }
    worst
}
