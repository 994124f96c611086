use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvDims, ConvTDims, NormCache};
use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Negative slope fixed at 0.2.
    LeakyRelu,
    Tanh,
    Sigmoid,
}

pub const LEAKY_SLOPE: f64 = 0.2;

enum Op<T> {
    Leaf,
    Conv1d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    },
    ConvT1d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    },
    PadReflect {
        input: Var,
        pad: usize,
    },
    InstanceNorm {
        input: Var,
        gain: Var,
        shift: Var,
        cache: NormCache<T>,
    },
    Act {
        input: Var,
        kind: Activation,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Abs(Var),
    Log(Var),
    Clamp {
        input: Var,
        lo: T,
        hi: T,
    },
    Mean(Var),
    Sum(Var),
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv1d { input, kernel, bias, .. } | Op::ConvT1d { input, kernel, bias, .. } => {
                vec![*input, *kernel, *bias]
            }
            Op::InstanceNorm { input, gain, shift, .. } => vec![*input, *gain, *shift],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::PadReflect { input, .. } | Op::Act { input, .. } | Op::Clamp { input, .. } => vec![*input],
            Op::Scale(a, _) | Op::AddScalar(a) | Op::Abs(a) | Op::Log(a) | Op::Mean(a) | Op::Sum(a) => vec![*a],
        }
    }
}

struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only tape. Nodes are stored in creation order, which is a valid
/// topological order because an operator can only consume existing nodes.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one backward pass, indexed by node.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf. `None` for constants, intermediate nodes and
    /// leaves not connected to the loss.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copies a tensor in as a leaf; it tracks gradients iff the tensor does.
    pub fn leaf(&mut self, t: &Tensor<T>) -> Var {
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: t.data().to_vec(),
            op: Op::Leaf,
            requires_grad: t.requires_grad(),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, shape: Vec<usize>, value: Vec<T>) -> Var {
        assert_eq!(numel(&shape), value.len(), "constant shape/data mismatch");
        self.nodes.push(Node {
            shape,
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Values of every node in creation order.
    pub fn values(&self) -> impl Iterator<Item = &[T]> {
        self.nodes.iter().map(|n| n.value.as_slice())
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Scalar value of a 1-element node.
    pub fn item(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    fn shape3(&self, v: Var, what: &str) -> Result<(usize, usize, usize)> {
        match self.shape(v) {
            &[b, c, l] => Ok((b, c, l)),
            s => Err(Error::Shape(format!("{what} must be [batch, channels, length], got {s:?}"))),
        }
    }

    /// 1D cross-correlation with zero padding. Kernel is `[c_out, c_in, k]`, bias `[c_out]`.
    pub fn conv1d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let (batch, c_in, len_in) = self.shape3(input, "conv1d input")?;
        let (c_out, kc_in, k) = self.shape3(kernel, "conv1d kernel")?;
        if kc_in != c_in {
            return Err(Error::Shape(format!(
                "conv1d kernel expects {kc_in} input channels, input has {c_in}"
            )));
        }
        if self.shape(bias) != [c_out] {
            return Err(Error::Shape(format!("conv1d bias must be [{c_out}], got {:?}", self.shape(bias))));
        }
        let len_out = kernels::conv1d_out_len(len_in, k, stride, padding)?;
        let dims = ConvDims {
            batch,
            c_in,
            c_out,
            len_in,
            len_out,
            k,
            stride,
            padding,
        };
        let out = kernels::conv1d_forward(&dims, self.value(input), self.value(kernel), self.value(bias));
        Ok(self.push(
            vec![batch, c_out, len_out],
            out,
            Op::Conv1d {
                input,
                kernel,
                bias,
                stride,
                padding,
            },
        ))
    }

    /// Fractionally-strided convolution, the adjoint of [`Graph::conv1d`] in its input.
    /// Kernel is `[c_in, c_out, k]`.
    pub fn conv1d_transposed(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Var> {
        let (batch, c_in, len_in) = self.shape3(input, "conv1d_transposed input")?;
        let (kc_in, c_out, k) = self.shape3(kernel, "conv1d_transposed kernel")?;
        if kc_in != c_in {
            return Err(Error::Shape(format!(
                "conv1d_transposed kernel expects {kc_in} input channels, input has {c_in}"
            )));
        }
        if self.shape(bias) != [c_out] {
            return Err(Error::Shape(format!(
                "conv1d_transposed bias must be [{c_out}], got {:?}",
                self.shape(bias)
            )));
        }
        let len_out = kernels::conv1d_transposed_out_len(len_in, k, stride, padding, output_padding)?;
        let dims = ConvTDims {
            batch,
            c_in,
            c_out,
            len_in,
            len_out,
            k,
            stride,
            padding,
        };
        let out = kernels::conv1d_transposed_forward(&dims, self.value(input), self.value(kernel), self.value(bias));
        Ok(self.push(
            vec![batch, c_out, len_out],
            out,
            Op::ConvT1d {
                input,
                kernel,
                bias,
                stride,
                padding,
            },
        ))
    }

    /// Mirror-pads the length axis by `pad` on both sides.
    pub fn pad_reflect(&mut self, input: Var, pad: usize) -> Result<Var> {
        let (batch, ch, len) = self.shape3(input, "pad_reflect input")?;
        if pad >= len {
            return Err(Error::Shape(format!("reflection pad {pad} needs length > {pad}, got {len}")));
        }
        let out_len = len + 2 * pad;
        let x = self.value(input);
        let mut out = Vec::with_capacity(batch * ch * out_len);
        for row in x.chunks(len) {
            for i in 0..out_len {
                out.push(row[kernels::reflect_index(i as isize - pad as isize, len)]);
            }
        }
        Ok(self.push(vec![batch, ch, out_len], out, Op::PadReflect { input, pad }))
    }

    /// `gain * (x - mean) / sqrt(var + eps) + shift` per (batch, channel), biased variance.
    pub fn instance_norm(&mut self, input: Var, gain: Var, shift: Var, eps: f64) -> Result<Var> {
        let (batch, ch, len) = self.shape3(input, "instance_norm input")?;
        if len < 2 {
            return Err(Error::Argument(format!("instance norm needs length >= 2, got {len}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("instance norm eps must be positive, got {eps}")));
        }
        if self.shape(gain) != [ch] || self.shape(shift) != [ch] {
            return Err(Error::Shape(format!("instance norm gain/shift must be [{ch}]")));
        }
        let (out, cache) = kernels::instance_norm_forward(
            self.value(input),
            batch,
            ch,
            len,
            self.value(gain),
            self.value(shift),
            T::lit(eps),
        );
        Ok(self.push(
            vec![batch, ch, len],
            out,
            Op::InstanceNorm {
                input,
                gain,
                shift,
                cache,
            },
        ))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let slope = T::lit(LEAKY_SLOPE);
        let out = self
            .value(input)
            .iter()
            .map(|&x| match kind {
                Activation::Relu => x.max(T::zero()),
                Activation::LeakyRelu => {
                    if x > T::zero() {
                        x
                    } else {
                        slope * x
                    }
                }
                Activation::Tanh => x.tanh(),
                Activation::Sigmoid => sigmoid(x),
            })
            .collect();
        let shape = self.shape(input).to_vec();
        self.push(shape, out, Op::Act { input, kind })
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_map(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, out, op)
    }

    fn map(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        Ok(self.zip_map(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        Ok(self.zip_map(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        Ok(self.zip_map(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.map(a, Op::Scale(a, s), |x| x * s)
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        self.map(a, Op::AddScalar(a), |x| x + s)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, Op::Abs(a), |x| x.abs())
    }

    /// Natural log. Inputs must be positive; clamp first where that is not guaranteed.
    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, Op::Log(a), |x| x.ln())
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        self.map(a, Op::Clamp { input: a, lo, hi }, |x| x.max(lo).min(hi))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().fold(T::zero(), |s, &x| s + x) / T::lit(v.len() as f64);
        self.push(vec![], vec![m], Op::Mean(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().fold(T::zero(), |s, &x| s + x);
        self.push(vec![], vec![s], Op::Sum(a))
    }

    /// Reverse pass from a scalar node. Only nodes that depend on a
    /// gradient-tracking leaf receive gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            self.backprop_node(node, &gy, &mut grads);
            // only leaf gradients are kept
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(gy);
            }
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node<T>, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        // lazily-allocated gradient buffer for a node that wants one
        fn slot<'a, T: Scalar>(g: &Graph<T>, grads: &'a mut [Option<Vec<T>>], v: Var) -> Option<&'a mut [T]> {
            if !g.nodes[v.0].requires_grad {
                return None;
            }
            let n = g.nodes[v.0].value.len();
            Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]).as_mut_slice())
        }

        match &node.op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (batch, c_in, len_in) = self.shape3(*input, "").expect("checked");
                let kshape = self.shape(*kernel);
                let dims = ConvDims {
                    batch,
                    c_in,
                    c_out: kshape[0],
                    len_in,
                    len_out: node.shape[2],
                    k: kshape[2],
                    stride: *stride,
                    padding: *padding,
                };
                let mut gx = take_slot(self, grads, *input);
                let mut gw = take_slot(self, grads, *kernel);
                let mut gb = take_slot(self, grads, *bias);
                kernels::conv1d_backward(
                    &dims,
                    self.value(*input),
                    self.value(*kernel),
                    gy,
                    gx.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                store(grads, *input, gx);
                store(grads, *kernel, gw);
                store(grads, *bias, gb);
            }
            Op::ConvT1d {
                input,
                kernel,
                bias,
                stride,
                padding,
            } => {
                let (batch, c_in, len_in) = self.shape3(*input, "").expect("checked");
                let kshape = self.shape(*kernel);
                let dims = ConvTDims {
                    batch,
                    c_in,
                    c_out: kshape[1],
                    len_in,
                    len_out: node.shape[2],
                    k: kshape[2],
                    stride: *stride,
                    padding: *padding,
                };
                let mut gx = take_slot(self, grads, *input);
                let mut gw = take_slot(self, grads, *kernel);
                let mut gb = take_slot(self, grads, *bias);
                kernels::conv1d_transposed_backward(
                    &dims,
                    self.value(*input),
                    self.value(*kernel),
                    gy,
                    gx.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                store(grads, *input, gx);
                store(grads, *kernel, gw);
                store(grads, *bias, gb);
            }
            Op::PadReflect { input, pad } => {
                let len = self.shape(*input)[2];
                let out_len = node.shape[2];
                if let Some(gx) = slot(self, grads, *input) {
                    for (row_out, row_in) in gy.chunks(out_len).zip(gx.chunks_mut(len)) {
                        for (i, &g) in row_out.iter().enumerate() {
                            row_in[kernels::reflect_index(i as isize - *pad as isize, len)] += g;
                        }
                    }
                }
            }
            Op::InstanceNorm {
                input,
                gain,
                shift,
                cache,
            } => {
                let (batch, ch, len) = (node.shape[0], node.shape[1], node.shape[2]);
                let mut gx = take_slot(self, grads, *input);
                let mut gg = take_slot(self, grads, *gain);
                let mut gs = take_slot(self, grads, *shift);
                kernels::instance_norm_backward(
                    cache,
                    gy,
                    batch,
                    ch,
                    len,
                    self.value(*gain),
                    gx.as_deref_mut(),
                    gg.as_deref_mut(),
                    gs.as_deref_mut(),
                );
                store(grads, *input, gx);
                store(grads, *gain, gg);
                store(grads, *shift, gs);
            }
            Op::Act { input, kind } => {
                let x = self.value(*input);
                let y = &node.value;
                let slope = T::lit(LEAKY_SLOPE);
                if let Some(gx) = slot(self, grads, *input) {
                    for i in 0..gx.len() {
                        let d = match kind {
                            Activation::Relu => {
                                if x[i] > T::zero() {
                                    T::one()
                                } else {
                                    T::zero()
                                }
                            }
                            Activation::LeakyRelu => {
                                if x[i] > T::zero() {
                                    T::one()
                                } else {
                                    slope
                                }
                            }
                            Activation::Tanh => T::one() - y[i] * y[i],
                            Activation::Sigmoid => y[i] * (T::one() - y[i]),
                        };
                        gx[i] += d * gy[i];
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = slot(self, grads, *a) {
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
                if let Some(gb) = slot(self, grads, *b) {
                    gb.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = slot(self, grads, *a) {
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
                if let Some(gb) = slot(self, grads, *b) {
                    gb.iter_mut().zip(gy).for_each(|(g, &d)| *g -= d);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(ga) = slot(self, grads, *a) {
                    for i in 0..ga.len() {
                        ga[i] += gy[i] * bv[i];
                    }
                }
                if let Some(gb) = slot(self, grads, *b) {
                    for i in 0..gb.len() {
                        gb[i] += gy[i] * av[i];
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = slot(self, grads, *a) {
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += d * *s);
                }
            }
            Op::AddScalar(a) => {
                if let Some(ga) = slot(self, grads, *a) {
                    ga.iter_mut().zip(gy).for_each(|(g, &d)| *g += d);
                }
            }
            Op::Abs(a) => {
                let x = self.value(*a);
                if let Some(ga) = slot(self, grads, *a) {
                    for i in 0..ga.len() {
                        let s = if x[i] > T::zero() {
                            T::one()
                        } else if x[i] < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        ga[i] += s * gy[i];
                    }
                }
            }
            Op::Log(a) => {
                let x = self.value(*a);
                if let Some(ga) = slot(self, grads, *a) {
                    for i in 0..ga.len() {
                        ga[i] += gy[i] / x[i];
                    }
                }
            }
            Op::Clamp { input, lo, hi } => {
                let x = self.value(*input);
                if let Some(ga) = slot(self, grads, *input) {
                    for i in 0..ga.len() {
                        if x[i] >= *lo && x[i] <= *hi {
                            ga[i] += gy[i];
                        }
                    }
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = slot(self, grads, *a) {
                    let d = gy[0] / T::lit(ga.len() as f64);
                    ga.iter_mut().for_each(|g| *g += d);
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = slot(self, grads, *a) {
                    ga.iter_mut().for_each(|g| *g += gy[0]);
                }
            }
        }
    }
}

fn take_slot<T: Scalar>(g: &Graph<T>, grads: &mut [Option<Vec<T>>], v: Var) -> Option<Vec<T>> {
    if !g.nodes[v.0].requires_grad {
        return None;
    }
    let n = g.nodes[v.0].value.len();
    Some(grads[v.0].take().unwrap_or_else(|| vec![T::zero(); n]))
}

fn store<T>(grads: &mut [Option<Vec<T>>], v: Var, g: Option<Vec<T>>) {
    if let Some(g) = g {
        grads[v.0] = Some(g);
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
