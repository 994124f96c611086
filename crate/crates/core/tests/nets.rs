mod common;

use pulsegan::autodiff::{Graph, ParamSet, Tensor};
use pulsegan::nets::{
    patch_map, patch_receptive_field, Bound, Discriminator, DiscriminatorSpec, Generator, GeneratorSpec,
};
use rand::Rng;

fn signal(len: usize, seed: u64) -> Vec<f64> {
    let mut r = common::rng(seed);
    (0..len)
        .map(|i| 0.6 * (i as f64 * 0.07).sin() + 0.3 * (r.random::<f64>() - 0.5))
        .collect()
}

fn gen_mean_output(gen: &Generator<f64>, x: &Tensor<f64>) -> f64 {
    let mut g = Graph::new();
    let vars = gen.bind(&mut g);
    let xv = g.leaf(x);
    let y = gen.forward(&mut g, &vars, xv).unwrap();
    let m = g.mean(y);
    g.item(m)
}

#[test]
fn generator_shape_and_range() {
    let gen = Generator::<f64>::init(GeneratorSpec { base_channels: 4, res_blocks: 9 }, 3);
    let mut g = Graph::new();
    let vars = gen.bind(&mut g);
    let x = g.constant(vec![4, 1, 256], signal(1024, 1));
    let y = gen.forward(&mut g, &vars, x).unwrap();
    assert_eq!(g.shape(y), &[4, 1, 256]);
    assert!(g.value(y).iter().all(|v| v.abs() < 1.0));
}

#[test]
fn full_generator_gradient_matches_finite_differences() {
    let gen = Generator::<f64>::init(GeneratorSpec { base_channels: 2, res_blocks: 9 }, 4);
    let x = Tensor::new(vec![2, 1, 32], signal(64, 2)).unwrap();

    let mut g = Graph::new();
    let vars = gen.bind(&mut g);
    let xv = g.leaf(&x);
    let y = gen.forward(&mut g, &vars, xv).unwrap();
    let loss = g.mean(y);
    let grads = g.backward(loss).unwrap();
    let mut analytic_params = gen.params.clone();
    analytic_params.accumulate_grads(&grads, &vars).unwrap();

    let mut r = common::rng(99);
    let names: Vec<String> = gen.params.iter().map(|(n, _)| n.to_string()).collect();
    let h = 1e-5;
    let (mut an, mut nu) = (Vec::new(), Vec::new());
    for _ in 0..60 {
        let name = &names[r.random_range(0..names.len())];
        let t = gen.params.get(name).unwrap();
        let j = r.random_range(0..t.numel());
        let mut plus = gen.clone();
        plus.params.get_mut(name).unwrap().data_mut()[j] += h;
        let mut minus = gen.clone();
        minus.params.get_mut(name).unwrap().data_mut()[j] -= h;
        let numeric = (gen_mean_output(&plus, &x) - gen_mean_output(&minus, &x)) / (2.0 * h);
        an.push(analytic_params.get(name).unwrap().grad().unwrap()[j]);
        nu.push(numeric);
    }
    let diff = an.iter().zip(&nu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = an.iter().map(|a| a * a).sum::<f64>().sqrt().max(nu.iter().map(|a| a * a).sum::<f64>().sqrt());
    assert!(scale > 0.0);
    assert!(diff / scale < 1e-4, "relative error {}", diff / scale);
}

#[test]
fn discriminator_outputs_probabilities() {
    let d = Discriminator::<f64>::init(
        DiscriminatorSpec {
            base_channels: 4,
            ..DiscriminatorSpec::default()
        },
        5,
    );
    let mut g = Graph::new();
    let vars = d.bind(&mut g);
    let x = g.constant(vec![3, 1, 256], signal(768, 3));
    let y = d.forward(&mut g, &vars, x).unwrap();
    assert_eq!(g.shape(y), &[3, 1, 30]);
    assert!(g.value(y).iter().all(|&p| p > 0.0 && p < 1.0));
    let short = g.constant(vec![1, 1, 200], vec![0.0; 200]);
    assert!(d.forward(&mut g, &vars, short).is_err());
}

fn local_disc(seed: u64) -> Discriminator<f64> {
    // instance norm couples every patch to whole-window statistics, so the
    // locality probes run on the bare conv stack
    Discriminator::init(
        DiscriminatorSpec {
            base_channels: 4,
            instance_norm: false,
            sigmoid_output: true,
        },
        seed,
    )
}

fn patches(d: &Discriminator<f64>, x: &[f64]) -> Vec<f64> {
    let mut g = Graph::new();
    let vars = d.bind(&mut g);
    let xv = g.constant(vec![1, 1, x.len()], x.to_vec());
    let b = Bound::new(&d.params, &vars).unwrap();
    let y = patch_map(&mut g, &b, d.spec, xv).unwrap();
    g.value(y).to_vec()
}

#[test]
fn shift_by_hop_shifts_patches() {
    let d = local_disc(6);
    let full = signal(448, 4);
    let whole = patches(&d, &full);
    let tail = patches(&d, &full[192..]);
    // interior patches: receptive field clear of the zero padding
    for j in 0..tail.len() {
        let (a, b) = patch_receptive_field(j);
        if a < 0 || b > 256 {
            continue;
        }
        assert!((tail[j] - whole[j + 24]).abs() < 1e-12, "patch {j}");
    }
}

#[test]
fn influence_mask_matches_receptive_field() {
    let d = local_disc(7);
    let x = signal(256, 5);
    let base = patches(&d, &x);
    for &i in &[0usize, 5, 40, 100, 128, 200, 255] {
        let mut y = x.clone();
        y[i] += 0.5;
        let out = patches(&d, &y);
        for j in 0..out.len() {
            let (a, b) = patch_receptive_field(j);
            let covers = (a..b).contains(&(i as isize));
            let changed = (out[j] - base[j]).abs() > 1e-14;
            assert_eq!(changed, covers, "sample {i}, patch {j}");
        }
    }
    // an interior patch depends on exactly 70 samples
    let j = 15;
    let count = (0..256)
        .filter(|&i| {
            let mut y = x.clone();
            y[i] += 0.5;
            (patches(&d, &y)[j] - base[j]).abs() > 1e-14
        })
        .count();
    assert_eq!(count, 70);
}

#[test]
fn init_is_seeded() {
    let spec = GeneratorSpec { base_channels: 4, res_blocks: 2 };
    let a = Generator::<f32>::init(spec, 1);
    assert_eq!(a, Generator::<f32>::init(spec, 1));
    assert_ne!(a, Generator::<f32>::init(spec, 2));
    for (name, t) in a.params.iter() {
        if name.ends_with(".gain") {
            assert!(t.data().iter().all(|&v| v == 1.0));
        }
        if name.ends_with(".shift") || name.ends_with(".b") {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn init_std_near_target() {
    let gen = Generator::<f64>::init(GeneratorSpec::default(), 11);
    let w = gen.params.get("res0.conv1.w").unwrap().data();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((sd - 0.02).abs() < 0.002, "std {sd}");
}

#[test]
fn params_cast_between_precisions() {
    let gen = Generator::<f64>::init(GeneratorSpec { base_channels: 2, res_blocks: 1 }, 1);
    let single: ParamSet<f32> = gen.params.cast();
    assert_eq!(single.count(), gen.params.count());
}
