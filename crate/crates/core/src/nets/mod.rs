//! 1D generator (ResNet encoder/decoder) and PatchGAN discriminator.

mod discriminator;
mod generator;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use discriminator::{
    discriminator_forward, patch_map, patch_receptive_field, Discriminator, DiscriminatorSpec, RECEPTIVE_FIELD,
};
pub use generator::{generator_forward, Generator, GeneratorSpec};

pub const INIT_STD: f64 = 0.02;
pub const NORM_EPS: f64 = 1e-5;

/// Parameters bound into one graph, looked up by name.
pub struct Bound<'a, T> {
    params: &'a ParamSet<T>,
    vars: &'a [Var],
}

impl<'a, T: Scalar> Bound<'a, T> {
    pub fn new(params: &'a ParamSet<T>, vars: &'a [Var]) -> Result<Self> {
        if params.len() != vars.len() {
            return Err(Error::Usage(format!(
                "{} bound vars for {} parameters",
                vars.len(),
                params.len()
            )));
        }
        Ok(Bound { params, vars })
    }

    fn var(&self, name: &str) -> Var {
        let idx = self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"));
        self.vars[idx]
    }

    fn conv(&self, g: &mut Graph<T>, name: &str, x: Var, stride: usize, padding: usize) -> Result<Var> {
        g.conv1d(x, self.var(&format!("{name}.w")), self.var(&format!("{name}.b")), stride, padding)
    }

    fn conv_t(&self, g: &mut Graph<T>, name: &str, x: Var, stride: usize, padding: usize, out_pad: usize) -> Result<Var> {
        g.conv1d_transposed(
            x,
            self.var(&format!("{name}.w")),
            self.var(&format!("{name}.b")),
            stride,
            padding,
            out_pad,
        )
    }

    fn norm(&self, g: &mut Graph<T>, name: &str, x: Var) -> Result<Var> {
        g.instance_norm(x, self.var(&format!("{name}.gain")), self.var(&format!("{name}.shift")), NORM_EPS)
    }
}

/// Seeded parameter factory: conv weights ~ N(0, 0.02), biases 0, norm gain 1 / shift 0.
pub(crate) struct Init<T> {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Init<T> {
    pub fn new(seed: u64) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, INIT_STD).expect("valid std"),
            params: ParamSet::new(),
        }
    }

    pub fn conv(&mut self, name: &str, shape: [usize; 3], bias_len: usize) {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::lit(self.normal.sample(&mut self.rng))).collect();
        self.params
            .push(format!("{name}.w"), Tensor::new(shape.to_vec(), data).expect("shape"));
        self.params.push(format!("{name}.b"), Tensor::zeros(vec![bias_len]));
    }

    pub fn norm(&mut self, name: &str, ch: usize) {
        self.params.push(format!("{name}.gain"), Tensor::full(vec![ch], T::one()));
        self.params.push(format!("{name}.shift"), Tensor::zeros(vec![ch]));
    }
}

fn check_input<T: Scalar>(g: &Graph<T>, x: Var, what: &str) -> Result<(usize, usize)> {
    match g.shape(x) {
        &[b, 1, l] => Ok((b, l)),
        s => Err(Error::Shape(format!("{what} input must be [batch, 1, length], got {s:?}"))),
    }
}
