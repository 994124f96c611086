use serde::{Deserialize, Serialize};

use super::{check_input, Bound, Init};
use crate::autodiff::{Activation, Graph, ParamSet, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::WINDOW_LEN;

/// Input samples seen by one output patch.
pub const RECEPTIVE_FIELD: usize = 70;

const KERNEL: usize = 4;
/// (stride, padding) of the five convs, input to output.
const LAYERS: [(usize, usize); 5] = [(2, 1), (2, 1), (2, 1), (1, 1), (1, 1)];

/// PatchGAN stack: three stride-2 and one stride-1 kernel-4 convs with widths
/// `c, 2c, 4c, 8c`, then a kernel-4 one-channel output conv.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorSpec {
    pub base_channels: usize,
    /// Instance norm after convs 2-4.
    pub instance_norm: bool,
    /// Sigmoid on the patch map (probabilities); off yields raw scores.
    pub sigmoid_output: bool,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        DiscriminatorSpec {
            base_channels: 64,
            instance_norm: true,
            sigmoid_output: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator<T> {
    pub spec: DiscriminatorSpec,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn init(spec: DiscriminatorSpec, seed: u64) -> Self {
        let c = spec.base_channels;
        let mut init = Init::<T>::new(seed);
        let widths = [1, c, 2 * c, 4 * c, 8 * c];
        for layer in 1..=4 {
            let (c_in, c_out) = (widths[layer - 1], widths[layer]);
            init.conv(&format!("l{layer}"), [c_out, c_in, KERNEL], c_out);
            if spec.instance_norm && layer > 1 {
                init.norm(&format!("l{layer}.norm"), c_out);
            }
        }
        init.conv("out", [1, 8 * c, KERNEL], 1);
        Discriminator {
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
        discriminator_forward(g, &Bound::new(&self.params, vars)?, self.spec, x)
    }

    /// Number of patches produced for a window of `len` samples.
    pub fn patch_count(len: usize) -> Result<usize> {
        LAYERS
            .iter()
            .try_fold(len, |l, &(s, p)| crate::autodiff::conv1d_out_len(l, KERNEL, s, p))
    }
}

/// Patch map of a 256-sample window: `[batch, 1, 30]`.
pub fn discriminator_forward<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound<'_, T>,
    spec: DiscriminatorSpec,
    x: Var,
) -> Result<Var> {
    let (_, len) = check_input(g, x, "discriminator")?;
    if len != WINDOW_LEN {
        return Err(Error::Shape(format!(
            "discriminator input length must be {WINDOW_LEN}, got {len}"
        )));
    }
    patch_map(g, p, spec, x)
}

/// Same stack on an input of any length that fits the receptive field.
pub fn patch_map<T: Scalar>(g: &mut Graph<T>, p: &Bound<'_, T>, spec: DiscriminatorSpec, x: Var) -> Result<Var> {
    let (_, len) = check_input(g, x, "discriminator")?;
    if len < RECEPTIVE_FIELD {
        return Err(Error::Shape(format!(
            "discriminator input must be at least {RECEPTIVE_FIELD} samples, got {len}"
        )));
    }
    let mut h = x;
    for (i, &(stride, padding)) in LAYERS[..4].iter().enumerate() {
        let layer = i + 1;
        h = p.conv(g, &format!("l{layer}"), h, stride, padding)?;
        if spec.instance_norm && layer > 1 {
            h = p.norm(g, &format!("l{layer}.norm"), h)?;
        }
        h = g.activation(h, Activation::LeakyRelu);
    }
    let (stride, padding) = LAYERS[4];
    let out = p.conv(g, "out", h, stride, padding)?;
    Ok(if spec.sigmoid_output {
        g.activation(out, Activation::Sigmoid)
    } else {
        out
    })
}

/// Input span `[start, start + 70)` covered by output patch `j` (may extend into padding).
pub fn patch_receptive_field(j: usize) -> (isize, isize) {
    // walk back through the stack: each layer maps [a, b) of its output to
    // [a*s - p, (b-1)*s - p + k) of its input
    let (mut a, mut b) = (j as isize, j as isize + 1);
    for &(s, p) in LAYERS.iter().rev() {
        let (s, p) = (s as isize, p as isize);
        a = a * s - p;
        b = (b - 1) * s - p + KERNEL as isize;
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn receptive_field_is_seventy() {
        for j in 0..30 {
            let (a, b) = patch_receptive_field(j);
            assert_eq!(b - a, RECEPTIVE_FIELD as isize);
            assert_eq!(a, 8 * j as isize - 23);
        }
    }

    #[test]
    fn patch_count_for_window() {
        assert_eq!(Discriminator::<f32>::patch_count(256).unwrap(), 30);
    }

    #[test]
    fn parameter_counts_are_frozen() {
        assert_eq!(Discriminator::<f32>::init(DiscriminatorSpec::default(), 0).params.count(), 693_185);
        let small = DiscriminatorSpec {
            base_channels: 8,
            ..DiscriminatorSpec::default()
        };
        assert_eq!(Discriminator::<f32>::init(small, 0).params.count(), 11_385);
    }
}
