//! Slice-level kernels behind the graph operators. Layouts are row-major
//! `[batch, channels, length]` for activations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `floor((len + 2*padding - k) / stride) + 1`
pub fn conv1d_out_len(len: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    let padded = len + 2 * padding;
    if k == 0 || k > padded {
        return Err(Error::Shape(format!(
            "kernel of width {k} does not fit a padded length of {padded}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// `(len - 1)*stride - 2*padding + k + output_padding`
pub fn conv1d_transposed_out_len(
    len: usize,
    k: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    if len == 0 || k == 0 {
        return Err(Error::Shape("empty input or kernel".into()));
    }
    if output_padding >= stride {
        return Err(Error::Argument(format!(
            "output padding {output_padding} must be smaller than stride {stride}"
        )));
    }
    let full = (len - 1) * stride + k + output_padding;
    if full <= 2 * padding {
        return Err(Error::Shape(format!(
            "padding {padding} consumes the whole transposed output"
        )));
    }
    Ok(full - 2 * padding)
}

/// Geometry shared by im2col and col2im: columns index `t in 0..cols_len`,
/// rows index `(c, k)`, and the source position is `t*stride + k - padding`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ColGeom {
    pub channels: usize,
    pub src_len: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub cols_len: usize,
}

impl ColGeom {
    fn rows(&self) -> usize {
        self.channels * self.k
    }

    pub fn cols_size(&self) -> usize {
        self.rows() * self.cols_len
    }

    pub fn im2col<T: Scalar>(&self, src: &[T], cols: &mut [T]) {
        debug_assert_eq!(src.len(), self.channels * self.src_len);
        debug_assert_eq!(cols.len(), self.cols_size());
        for c in 0..self.channels {
            let s = &src[c * self.src_len..(c + 1) * self.src_len];
            for k in 0..self.k {
                let row = &mut cols[(c * self.k + k) * self.cols_len..(c * self.k + k + 1) * self.cols_len];
                for (t, out) in row.iter_mut().enumerate() {
                    let pos = (t * self.stride + k) as isize - self.padding as isize;
                    *out = if pos >= 0 && (pos as usize) < self.src_len {
                        s[pos as usize]
                    } else {
                        T::zero()
                    };
                }
            }
        }
    }

    /// Scatter-adds the columns back onto `dst` (adjoint of [`im2col`]).
    pub fn col2im<T: Scalar>(&self, cols: &[T], dst: &mut [T]) {
        debug_assert_eq!(dst.len(), self.channels * self.src_len);
        debug_assert_eq!(cols.len(), self.cols_size());
        for c in 0..self.channels {
            let d = &mut dst[c * self.src_len..(c + 1) * self.src_len];
            for k in 0..self.k {
                let row = &cols[(c * self.k + k) * self.cols_len..(c * self.k + k + 1) * self.cols_len];
                for (t, &v) in row.iter().enumerate() {
                    let pos = (t * self.stride + k) as isize - self.padding as isize;
                    if pos >= 0 && (pos as usize) < self.src_len {
                        d[pos as usize] += v;
                    }
                }
            }
        }
    }
}

pub(crate) struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len_in: usize,
    pub len_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvDims {
    fn geom(&self) -> ColGeom {
        ColGeom {
            channels: self.c_in,
            src_len: self.len_in,
            k: self.k,
            stride: self.stride,
            padding: self.padding,
            cols_len: self.len_out,
        }
    }
}

/// Cross-correlation `y[b, o, t] = bias[o] + sum_{c,k} w[o, c, k] * x[b, c, t*s + k - p]`.
pub(crate) fn conv1d_forward<T: Scalar>(d: &ConvDims, x: &[T], w: &[T], bias: &[T]) -> Vec<T> {
    let g = d.geom();
    let mut cols = vec![T::zero(); g.cols_size()];
    let mut out = vec![T::zero(); d.batch * d.c_out * d.len_out];
    let xs = d.c_in * d.len_in;
    let ys = d.c_out * d.len_out;
    for b in 0..d.batch {
        g.im2col(&x[b * xs..(b + 1) * xs], &mut cols);
        let y = &mut out[b * ys..(b + 1) * ys];
        for (o, row) in y.chunks_mut(d.len_out).enumerate() {
            row.fill(bias[o]);
        }
        T::gemm(d.c_out, d.c_in * d.k, d.len_out, T::one(), w, false, &cols, false, T::one(), y);
    }
    out
}

/// Accumulates input, kernel and bias gradients of [`conv1d_forward`].
pub(crate) fn conv1d_backward<T: Scalar>(
    d: &ConvDims,
    x: &[T],
    w: &[T],
    gy: &[T],
    mut gx: Option<&mut [T]>,
    mut gw: Option<&mut [T]>,
    mut gb: Option<&mut [T]>,
) {
    let g = d.geom();
    let mut cols = vec![T::zero(); g.cols_size()];
    let xs = d.c_in * d.len_in;
    let ys = d.c_out * d.len_out;
    for b in 0..d.batch {
        let gyb = &gy[b * ys..(b + 1) * ys];
        if let Some(gb) = gb.as_deref_mut() {
            for (o, row) in gyb.chunks(d.len_out).enumerate() {
                gb[o] += row.iter().fold(T::zero(), |a, &v| a + v);
            }
        }
        if let Some(gw) = gw.as_deref_mut() {
            g.im2col(&x[b * xs..(b + 1) * xs], &mut cols);
            T::gemm(d.c_out, d.len_out, d.c_in * d.k, T::one(), gyb, false, &cols, true, T::one(), gw);
        }
        if let Some(gx) = gx.as_deref_mut() {
            T::gemm(d.c_in * d.k, d.c_out, d.len_out, T::one(), w, true, gyb, false, T::zero(), &mut cols);
            g.col2im(&cols, &mut gx[b * xs..(b + 1) * xs]);
        }
    }
}

/// Dimensions of a transposed convolution with kernel `[c_in, c_out, k]`.
pub(crate) struct ConvTDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len_in: usize,
    pub len_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTDims {
    fn geom(&self) -> ColGeom {
        // columns run over input positions, source is the (larger) output
        ColGeom {
            channels: self.c_out,
            src_len: self.len_out,
            k: self.k,
            stride: self.stride,
            padding: self.padding,
            cols_len: self.len_in,
        }
    }
}

/// Adjoint of [`conv1d_forward`] in its input: `y[b, o, t*s + k - p] += w[c, o, k] * x[b, c, t]`.
pub(crate) fn conv1d_transposed_forward<T: Scalar>(d: &ConvTDims, x: &[T], w: &[T], bias: &[T]) -> Vec<T> {
    let g = d.geom();
    let mut cols = vec![T::zero(); g.cols_size()];
    let mut out = vec![T::zero(); d.batch * d.c_out * d.len_out];
    let xs = d.c_in * d.len_in;
    let ys = d.c_out * d.len_out;
    for b in 0..d.batch {
        T::gemm(d.c_out * d.k, d.c_in, d.len_in, T::one(), w, true, &x[b * xs..(b + 1) * xs], false, T::zero(), &mut cols);
        let y = &mut out[b * ys..(b + 1) * ys];
        for (o, row) in y.chunks_mut(d.len_out).enumerate() {
            row.fill(bias[o]);
        }
        g.col2im(&cols, y);
    }
    out
}

pub(crate) fn conv1d_transposed_backward<T: Scalar>(
    d: &ConvTDims,
    x: &[T],
    w: &[T],
    gy: &[T],
    mut gx: Option<&mut [T]>,
    mut gw: Option<&mut [T]>,
    mut gb: Option<&mut [T]>,
) {
    let g = d.geom();
    let mut cols = vec![T::zero(); g.cols_size()];
    let xs = d.c_in * d.len_in;
    let ys = d.c_out * d.len_out;
    for b in 0..d.batch {
        let gyb = &gy[b * ys..(b + 1) * ys];
        if let Some(gb) = gb.as_deref_mut() {
            for (o, row) in gyb.chunks(d.len_out).enumerate() {
                gb[o] += row.iter().fold(T::zero(), |a, &v| a + v);
            }
        }
        if gx.is_none() && gw.is_none() {
            continue;
        }
        g.im2col(gyb, &mut cols);
        if let Some(gx) = gx.as_deref_mut() {
            T::gemm(d.c_in, d.c_out * d.k, d.len_in, T::one(), w, false, &cols, false, T::one(), &mut gx[b * xs..(b + 1) * xs]);
        }
        if let Some(gw) = gw.as_deref_mut() {
            T::gemm(d.c_in, d.len_in, d.c_out * d.k, T::one(), &x[b * xs..(b + 1) * xs], false, &cols, true, T::one(), gw);
        }
    }
}

/// Mirror index for reflection padding (edge sample not repeated).
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    let last = len as isize - 1;
    let j = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    j as usize
}

/// Per-(batch, channel) statistics saved by instance norm for the backward pass.
pub(crate) struct NormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn instance_norm_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    ch: usize,
    len: usize,
    gain: &[T],
    shift: &[T],
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); batch * ch];
    let n = T::lit(len as f64);
    for b in 0..batch {
        for c in 0..ch {
            let off = (b * ch + c) * len;
            let row = &x[off..off + len];
            let mean = row.iter().fold(T::zero(), |a, &v| a + v) / n;
            let var = row.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
            let is = T::one() / (var + eps).sqrt();
            inv_std[b * ch + c] = is;
            for i in 0..len {
                let h = (row[i] - mean) * is;
                xhat[off + i] = h;
                y[off + i] = gain[c] * h + shift[c];
            }
        }
    }
    (y, NormCache { xhat, inv_std })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn instance_norm_backward<T: Scalar>(
    cache: &NormCache<T>,
    gy: &[T],
    batch: usize,
    ch: usize,
    len: usize,
    gain: &[T],
    mut gx: Option<&mut [T]>,
    mut ggain: Option<&mut [T]>,
    mut gshift: Option<&mut [T]>,
) {
    let n = T::lit(len as f64);
    for b in 0..batch {
        for c in 0..ch {
            let off = (b * ch + c) * len;
            let gyr = &gy[off..off + len];
            let xh = &cache.xhat[off..off + len];
            let sum_gy = gyr.iter().fold(T::zero(), |a, &v| a + v);
            let sum_gy_xh = gyr.iter().zip(xh).fold(T::zero(), |a, (&g, &h)| a + g * h);
            if let Some(gs) = gshift.as_deref_mut() {
                gs[c] += sum_gy;
            }
            if let Some(gg) = ggain.as_deref_mut() {
                gg[c] += sum_gy_xh;
            }
            if let Some(gx) = gx.as_deref_mut() {
                let scale = gain[c] * cache.inv_std[b * ch + c] / n;
                for i in 0..len {
                    gx[off + i] += scale * (n * gyr[i] - sum_gy - xh[i] * sum_gy_xh);
                }
            }
        }
    }
}
