use serde::{Deserialize, Serialize};

use super::{check_input, Bound, Init};
use crate::autodiff::{Activation, Graph, ParamSet, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Widths of the encoder/decoder. Channels run `c -> 2c -> 4c` through the two
/// stride-2 downsampling convs and back through the two transposed convs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub base_channels: usize,
    pub res_blocks: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            base_channels: 64,
            res_blocks: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator<T> {
    pub spec: GeneratorSpec,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn init(spec: GeneratorSpec, seed: u64) -> Self {
        let c = spec.base_channels;
        let mut init = Init::<T>::new(seed);
        init.conv("stem", [c, 1, 7], c);
        init.norm("stem.norm", c);
        init.conv("down1", [2 * c, c, 3], 2 * c);
        init.norm("down1.norm", 2 * c);
        init.conv("down2", [4 * c, 2 * c, 3], 4 * c);
        init.norm("down2.norm", 4 * c);
        for i in 0..spec.res_blocks {
            for j in 1..=2 {
                init.conv(&format!("res{i}.conv{j}"), [4 * c, 4 * c, 3], 4 * c);
                init.norm(&format!("res{i}.norm{j}"), 4 * c);
            }
        }
        // transposed kernels are [c_in, c_out, k]
        init.conv("up1", [4 * c, 2 * c, 3], 2 * c);
        init.norm("up1.norm", 2 * c);
        init.conv("up2", [2 * c, c, 3], c);
        init.norm("up2.norm", c);
        init.conv("head", [1, c, 7], 1);
        Generator {
            spec,
            params: init.params,
        }
    }

    pub fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params.bind(g)
    }

    pub fn bind_frozen(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params.bind_frozen(g)
    }

    pub fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        generator_forward(g, &Bound::new(&self.params, vars)?, self.spec, x)
    }
}

/// Maps `[batch, 1, L]` to `[batch, 1, L]` for any `L` divisible by 4 (256 in practice),
/// with a tanh head so outputs lie in (-1, 1).
pub fn generator_forward<T: Scalar>(g: &mut Graph<T>, p: &Bound<'_, T>, spec: GeneratorSpec, x: Var) -> Result<Var> {
    let (_, len) = check_input(g, x, "generator")?;
    if len % 4 != 0 || len < 16 {
        return Err(Error::Shape(format!(
            "generator input length must be a multiple of 4 and at least 16, got {len}"
        )));
    }
    let relu = |g: &mut Graph<T>, v| g.activation(v, Activation::Relu);

    let h = g.pad_reflect(x, 3)?;
    let h = p.conv(g, "stem", h, 1, 0)?;
    let h = p.norm(g, "stem.norm", h)?;
    let mut h = relu(g, h);

    for name in ["down1", "down2"] {
        let c = p.conv(g, name, h, 2, 1)?;
        let n = p.norm(g, &format!("{name}.norm"), c)?;
        h = relu(g, n);
    }

    for i in 0..spec.res_blocks {
        let r = g.pad_reflect(h, 1)?;
        let r = p.conv(g, &format!("res{i}.conv1"), r, 1, 0)?;
        let r = p.norm(g, &format!("res{i}.norm1"), r)?;
        let r = relu(g, r);
        let r = g.pad_reflect(r, 1)?;
        let r = p.conv(g, &format!("res{i}.conv2"), r, 1, 0)?;
        let r = p.norm(g, &format!("res{i}.norm2"), r)?;
        h = g.add(h, r)?;
    }

    for name in ["up1", "up2"] {
        let c = p.conv_t(g, name, h, 2, 1, 1)?;
        let n = p.norm(g, &format!("{name}.norm"), c)?;
        h = relu(g, n);
    }

    let h = g.pad_reflect(h, 3)?;
    let h = p.conv(g, "head", h, 1, 0)?;
    Ok(g.activation(h, Activation::Tanh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn run(gen: &Generator<f64>, batch: usize, len: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut g = Graph::new();
        let vars = gen.bind(&mut g);
        let data = (0..batch * len).map(|i| (i as f64 * 0.05).sin()).collect();
        let x = g.leaf(&Tensor::new(vec![batch, 1, len], data).unwrap());
        let y = gen.forward(&mut g, &vars, x)?;
        Ok((g.shape(y).to_vec(), g.value(y).to_vec()))
    }

    #[test]
    fn length_preserving() {
        let gen = Generator::<f64>::init(GeneratorSpec { base_channels: 4, res_blocks: 2 }, 1);
        let (shape, values) = run(&gen, 4, 256).unwrap();
        assert_eq!(shape, vec![4, 1, 256]);
        assert!(values.iter().all(|v| v.abs() < 1.0));
        for len in [64, 128, 512] {
            assert_eq!(run(&gen, 1, len).unwrap().0, vec![1, 1, len]);
        }
        assert!(matches!(run(&gen, 1, 254), Err(Error::Shape(_))));
    }

    #[test]
    fn parameter_counts_are_frozen() {
        assert_eq!(Generator::<f32>::init(GeneratorSpec::default(), 0).params.count(), 3_801_345);
        let small = GeneratorSpec { base_channels: 8, res_blocks: 9 };
        assert_eq!(Generator::<f32>::init(small, 0).params.count(), 61_217);
    }
}
