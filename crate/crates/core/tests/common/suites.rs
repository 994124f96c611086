//! Reusable check bodies shared by the focused tests and the acceptance run.

use pulsegan::autodiff::{Activation, Graph, Tensor};
use pulsegan::nets::{Generator, GeneratorSpec};
use rand::Rng;

use super::{gradcheck, random_tensor, rng, weighted_sum};

pub const H: f64 = 1e-5;

/// Worst finite-difference relative error for every graph operator.
pub fn operator_errors() -> Vec<(&'static str, f64)> {
    let mut r = rng(41);
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for &(stride, padding, k) in &[(1, 0, 3), (2, 1, 3), (2, 1, 4)] {
        let ts = [
            random_tensor(&mut r, &[2, 3, 11], 0.0),
            random_tensor(&mut r, &[4, 3, k], 0.0),
            random_tensor(&mut r, &[4], 0.0),
        ];
        worst = worst.max(gradcheck(
            &ts,
            |g, v| {
                let y = g.conv1d(v[0], v[1], v[2], stride, padding).unwrap();
                weighted_sum(g, y, 1)
            },
            H,
        ));
    }
    out.push(("conv1d", worst));

    let mut worst = 0.0f64;
    for &(stride, padding, op, k) in &[(1, 0, 0, 3), (2, 1, 1, 3), (2, 1, 0, 4)] {
        let ts = [
            random_tensor(&mut r, &[2, 3, 6], 0.0),
            random_tensor(&mut r, &[3, 2, k], 0.0),
            random_tensor(&mut r, &[2], 0.0),
        ];
        worst = worst.max(gradcheck(
            &ts,
            |g, v| {
                let y = g.conv1d_transposed(v[0], v[1], v[2], stride, padding, op).unwrap();
                weighted_sum(g, y, 2)
            },
            H,
        ));
    }
    out.push(("conv1d_transposed", worst));

    let ts = [
        random_tensor(&mut r, &[2, 3, 9], 0.0),
        random_tensor(&mut r, &[3], 0.0),
        random_tensor(&mut r, &[3], 0.0),
    ];
    out.push((
        "instance_norm",
        gradcheck(
            &ts,
            |g, v| {
                let y = g.instance_norm(v[0], v[1], v[2], 1e-5).unwrap();
                weighted_sum(g, y, 3)
            },
            H,
        ),
    ));

    out.push((
        "pad_reflect",
        gradcheck(
            &[random_tensor(&mut r, &[2, 2, 8], 0.0)],
            |g, v| {
                let y = g.pad_reflect(v[0], 3).unwrap();
                weighted_sum(g, y, 4)
            },
            H,
        ),
    ));

    for (name, kind) in [
        ("relu", Activation::Relu),
        ("leaky_relu", Activation::LeakyRelu),
        ("tanh", Activation::Tanh),
        ("sigmoid", Activation::Sigmoid),
    ] {
        let x = random_tensor(&mut r, &[2, 2, 7], 1e-3);
        out.push((
            name,
            gradcheck(
                &[x],
                |g, v| {
                    let y = g.activation(v[0], kind);
                    weighted_sum(g, y, 5)
                },
                H,
            ),
        ));
    }

    let ab = [random_tensor(&mut r, &[3, 5], 1e-3), random_tensor(&mut r, &[3, 5], 1e-3)];
    type Build = fn(&mut Graph<f64>, &[pulsegan::autodiff::Var]) -> pulsegan::autodiff::Var;
    let cases: [(&'static str, Build); 9] = [
        ("add", |g, v| {
            let y = g.add(v[0], v[1]).unwrap();
            weighted_sum(g, y, 6)
        }),
        ("sub", |g, v| {
            let y = g.sub(v[0], v[1]).unwrap();
            weighted_sum(g, y, 6)
        }),
        ("mul", |g, v| {
            let y = g.mul(v[0], v[1]).unwrap();
            weighted_sum(g, y, 6)
        }),
        ("scale", |g, v| {
            let y = g.scale(v[0], -2.5);
            weighted_sum(g, y, 6)
        }),
        ("add_scalar", |g, v| {
            let y = g.add_scalar(v[0], 0.75);
            let z = g.mul(y, v[1]).unwrap();
            weighted_sum(g, z, 6)
        }),
        ("abs", |g, v| {
            let y = g.abs(v[0]);
            weighted_sum(g, y, 6)
        }),
        ("log", |g, v| {
            let a = g.abs(v[0]);
            let p = g.add_scalar(a, 0.5);
            let y = g.log(p);
            weighted_sum(g, y, 6)
        }),
        ("clamp", |g, v| {
            let y = g.clamp(v[0], -0.999, 0.999);
            weighted_sum(g, y, 6)
        }),
        ("mean_sum", |g, v| {
            let m = g.mul(v[0], v[1]).unwrap();
            let a = g.mean(m);
            let s = g.sum(v[0]);
            let s2 = g.scale(s, 0.3);
            g.add(a, s2).unwrap()
        }),
    ];
    for (name, build) in cases {
        out.push((name, gradcheck(&ab, build, H)));
    }
    out
}

/// Mean generator output together with the value of every graph node.
fn gen_pass(gen: &Generator<f64>, x: &Tensor<f64>) -> (f64, Vec<Vec<f64>>) {
    let mut g = Graph::new();
    let vars = gen.bind_frozen(&mut g);
    let xv = g.constant(x.shape().to_vec(), x.data().to_vec());
    let y = gen.forward(&mut g, &vars, xv).unwrap();
    let m = g.mean(y);
    (g.item(m), g.values().map(<[f64]>::to_vec).collect())
}

/// True when some element is exactly zero in one pass and not in the other,
/// which for the generator means a ReLU switched between `x - h` and `x + h`
/// and the central difference straddles a kink.
fn crosses_kink(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.iter()
        .zip(b)
        .any(|(u, v)| u.iter().zip(v).any(|(p, q)| (*p == 0.0) != (*q == 0.0)))
}

/// Result of the full-generator finite-difference check.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorCheck {
    pub relative_error: f64,
    pub samples: usize,
    /// Draws redrawn because the probe crossed a ReLU kink.
    pub kinks: usize,
}

/// Relative error between backprop and central differences over `samples`
/// randomly chosen parameters of a full (narrow) generator on a random input.
/// Draws whose probe crosses a ReLU kink are redrawn: the function is not
/// differentiable along that segment, so the difference quotient is no oracle.
pub fn generator_error(samples: usize, seed: u64) -> GeneratorCheck {
    let gen = Generator::<f64>::init(
        GeneratorSpec {
            base_channels: 4,
            res_blocks: 9,
        },
        seed,
    );
    let mut r = rng(seed + 1000);
    let data: Vec<f64> = (0..2 * 64).map(|_| r.random_range(-1.0..1.0)).collect();
    let x = Tensor::new(vec![2, 1, 64], data).unwrap();
    let mut g = Graph::new();
    let vars = gen.bind(&mut g);
    let xv = g.constant(vec![2, 1, 64], x.data().to_vec());
    let y = gen.forward(&mut g, &vars, xv).unwrap();
    let loss = g.mean(y);
    let grads = g.backward(loss).unwrap();
    let mut analytic = gen.params.clone();
    analytic.accumulate_grads(&grads, &vars).unwrap();

    let names: Vec<String> = gen.params.iter().map(|(n, _)| n.to_string()).collect();
    let (mut an, mut nu) = (Vec::new(), Vec::new());
    let mut kinks = 0;
    while an.len() < samples {
        assert!(kinks <= samples, "too many kink crossings");
        let name = &names[r.random_range(0..names.len())];
        let j = r.random_range(0..gen.params.get(name).unwrap().numel());
        let mut plus = gen.clone();
        plus.params.get_mut(name).unwrap().data_mut()[j] += H;
        let mut minus = gen.clone();
        minus.params.get_mut(name).unwrap().data_mut()[j] -= H;
        let (fp, vp) = gen_pass(&plus, &x);
        let (fm, vm) = gen_pass(&minus, &x);
        if crosses_kink(&vp, &vm) {
            kinks += 1;
            continue;
        }
        nu.push((fp - fm) / (2.0 * H));
        an.push(analytic.get(name).unwrap().grad().unwrap()[j]);
    }
    let diff = an.iter().zip(&nu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    GeneratorCheck {
        relative_error: diff / norm(&an).max(norm(&nu)),
        samples,
        kinks,
    }
}

/// Largest relative gap between `<conv(x, w), y>` and `<x, conv_t(y, w)>` over random cases.
pub fn adjoint_worst(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = r.random_range(1..3);
        let c_in = r.random_range(1..5);
        let c_out = r.random_range(1..5);
        let k = r.random_range(1..6);
        let stride = r.random_range(1..4);
        let padding = r.random_range(0..k);
        let len = r.random_range(k.max(2)..24) + 2 * padding;
        let mut g = Graph::<f64>::new();
        let rand_vec = |r: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()
        };
        let x = g.constant(vec![b, c_in, len], rand_vec(&mut r, b * c_in * len));
        let w = g.constant(vec![c_out, c_in, k], rand_vec(&mut r, c_out * c_in * k));
        let zero_out = g.constant(vec![c_out], vec![0.0; c_out]);
        let zero_in = g.constant(vec![c_in], vec![0.0; c_in]);
        let cx = g.conv1d(x, w, zero_out, stride, padding).unwrap();
        let out_len = g.shape(cx)[2];
        let op = len + 2 * padding - ((out_len - 1) * stride + k);
        let y = g.constant(vec![b, c_out, out_len], rand_vec(&mut r, b * c_out * out_len));
        let ty = g.conv1d_transposed(y, w, zero_in, stride, padding, op).unwrap();
        assert_eq!(g.shape(ty), g.shape(x));
        let lhs: f64 = g.value(cx).iter().zip(g.value(y)).map(|(a, b)| a * b).sum();
        let rhs: f64 = g.value(x).iter().zip(g.value(ty)).map(|(a, b)| a * b).sum();
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())));
    }
    worst
}
