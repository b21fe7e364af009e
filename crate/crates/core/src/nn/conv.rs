//! im2col-based 2-D convolution and transposed convolution kernels on single
//! CHW samples. Weights are stored as `[out, in, k*k]` for convolutions and
//! `[in, out, k*k]` for transposed convolutions (the PyTorch layouts).

use super::tensor::{Scalar, Tensor};

/// Geometry of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            padding,
        }
    }

    /// Output extent of a convolution over `input` samples, `None` if the
    /// kernel does not fit.
    pub fn conv_out(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// Output extent of the transposed convolution.
    pub fn transposed_out(&self, input: usize, output_padding: usize) -> Option<usize> {
        ((input - 1) * self.stride + self.kernel + output_padding).checked_sub(2 * self.padding)
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }
}

/// Unfolds `x` (C x H x W) into a `[C*k*k, out_h*out_w]` row-major matrix.
pub fn im2col<T: Scalar>(
    x: &[T],
    [c, h, w]: [usize; 3],
    g: ConvGeometry,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    let k = g.kernel;
    let cols_n = out_h * out_w;
    let mut cols = vec![T::ZERO; c * k * k * cols_n];
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut cols[row * cols_n..(row + 1) * cols_n];
                for oh in 0..out_h {
                    let ih = (oh * g.stride + ki) as isize - g.padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let src_row = &plane[ih as usize * w..(ih as usize + 1) * w];
                    let dst_row = &mut dst[oh * out_w..(oh + 1) * out_w];
                    for (ow, d) in dst_row.iter_mut().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.padding as isize;
                        if iw >= 0 && iw < w as isize {
                            *d = src_row[iw as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into an image.
pub fn col2im<T: Scalar>(
    cols: &[T],
    [c, h, w]: [usize; 3],
    g: ConvGeometry,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    let k = g.kernel;
    let cols_n = out_h * out_w;
    let mut x = vec![T::ZERO; c * h * w];
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &cols[row * cols_n..(row + 1) * cols_n];
                for oh in 0..out_h {
                    let ih = (oh * g.stride + ki) as isize - g.padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[ih as usize * w..(ih as usize + 1) * w];
                    let src_row = &src[oh * out_w..(oh + 1) * out_w];
                    for (ow, &s) in src_row.iter().enumerate() {
                        let iw = (ow * g.stride + kj) as isize - g.padding as isize;
                        if iw >= 0 && iw < w as isize {
                            dst_row[iw as usize] += s;
                        }
                    }
                }
            }
        }
    }
    x
}

fn add_bias<T: Scalar>(out: &mut [T], bias: Option<&Tensor<T>>, plane: usize) {
    if let Some(b) = bias {
        for (co, chunk) in out.chunks_mut(plane).enumerate() {
            let bv = b.data()[co];
            for v in chunk {
                *v += bv;
            }
        }
    }
}

fn bias_grad<T: Scalar>(dout: &Tensor<T>) -> Tensor<T> {
    let c = dout.channels();
    Tensor::from_vec(
        [c, 1, 1],
        (0..c).map(|ci| dout.channel(ci).iter().copied().sum()).collect(),
    )
}

/// Plain convolution with zero padding.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    g: ConvGeometry,
) -> Tensor<T> {
    let [cin, h, w] = x.shape();
    let [cout, wcin, kk] = weight.shape();
    assert_eq!(wcin, cin, "conv2d: weight expects {wcin} input channels, got {cin}");
    assert_eq!(kk, g.kernel * g.kernel, "conv2d: kernel size mismatch");
    let out_h = g.conv_out(h).expect("conv2d: kernel larger than padded input");
    let out_w = g.conv_out(w).expect("conv2d: kernel larger than padded input");
    let plane = out_h * out_w;
    let ck = cin * kk;
    let mut out = vec![T::ZERO; cout * plane];
    if g.is_pointwise() {
        T::gemm(cout, ck, plane, weight.data(), (ck as isize, 1), x.data(), (plane as isize, 1), T::ZERO, &mut out);
    } else {
        let cols = im2col(x.data(), x.shape(), g, out_h, out_w);
        T::gemm(cout, ck, plane, weight.data(), (ck as isize, 1), &cols, (plane as isize, 1), T::ZERO, &mut out);
    }
    add_bias(&mut out, bias, plane);
    Tensor::from_vec([cout, out_h, out_w], out)
}

/// Gradients of [`conv2d`] with respect to input, weight and bias.
///
/// Only the requested gradients are computed; the others come back `None`.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dout: &Tensor<T>,
    g: ConvGeometry,
    (want_dx, want_dw): (bool, bool),
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Tensor<T>) {
    let [cin, _, _] = x.shape();
    let [cout, _, kk] = weight.shape();
    let [_, out_h, out_w] = dout.shape();
    let plane = out_h * out_w;
    let ck = cin * kk;
    let dw = want_dw.then(|| {
        let owned_cols;
        let cols: &[T] = if g.is_pointwise() {
            x.data()
        } else {
            owned_cols = im2col(x.data(), x.shape(), g, out_h, out_w);
            &owned_cols
        };
        // dW = dout * cols^T
        let mut dw = vec![T::ZERO; cout * ck];
        T::gemm(cout, plane, ck, dout.data(), (plane as isize, 1), cols, (1, plane as isize), T::ZERO, &mut dw);
        Tensor::from_vec(weight.shape(), dw)
    });
    let dx = want_dx.then(|| {
        // dcols = W^T * dout
        let mut dcols = vec![T::ZERO; ck * plane];
        T::gemm(ck, cout, plane, weight.data(), (1, ck as isize), dout.data(), (plane as isize, 1), T::ZERO, &mut dcols);
        let dx = if g.is_pointwise() {
            dcols
        } else {
            col2im(&dcols, x.shape(), g, out_h, out_w)
        };
        Tensor::from_vec(x.shape(), dx)
    });
    (dx, dw, bias_grad(dout))
}

/// Transposed convolution (the adjoint of [`conv2d`] with the same geometry).
pub fn conv_transpose2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    g: ConvGeometry,
    output_padding: usize,
) -> Tensor<T> {
    let [cin, h, w] = x.shape();
    let [wcin, cout, kk] = weight.shape();
    assert_eq!(wcin, cin, "conv_transpose2d: weight expects {wcin} input channels, got {cin}");
    assert_eq!(kk, g.kernel * g.kernel, "conv_transpose2d: kernel size mismatch");
    let out_h = g.transposed_out(h, output_padding).expect("conv_transpose2d: bad geometry");
    let out_w = g.transposed_out(w, output_padding).expect("conv_transpose2d: bad geometry");
    let plane = h * w;
    let ck = cout * kk;
    // cols = W^T * x, W viewed as [cin, cout*k*k]
    let mut cols = vec![T::ZERO; ck * plane];
    T::gemm(ck, cin, plane, weight.data(), (1, ck as isize), x.data(), (plane as isize, 1), T::ZERO, &mut cols);
    let mut out = col2im(&cols, [cout, out_h, out_w], g, h, w);
    add_bias(&mut out, bias, out_h * out_w);
    Tensor::from_vec([cout, out_h, out_w], out)
}

/// Gradients of [`conv_transpose2d`] with respect to input, weight and bias.
pub fn conv_transpose2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dout: &Tensor<T>,
    g: ConvGeometry,
    (want_dx, want_dw): (bool, bool),
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Tensor<T>) {
    let [cin, h, w] = x.shape();
    let [_, cout, kk] = weight.shape();
    let plane = h * w;
    let ck = cout * kk;
    let dcols = im2col(dout.data(), dout.shape(), g, h, w);
    let dx = want_dx.then(|| {
        let mut dx = vec![T::ZERO; cin * plane];
        T::gemm(cin, ck, plane, weight.data(), (ck as isize, 1), &dcols, (plane as isize, 1), T::ZERO, &mut dx);
        Tensor::from_vec(x.shape(), dx)
    });
    let dw = want_dw.then(|| {
        let mut dw = vec![T::ZERO; cin * ck];
        T::gemm(cin, plane, ck, x.data(), (plane as isize, 1), &dcols, (1, plane as isize), T::ZERO, &mut dw);
        Tensor::from_vec(weight.shape(), dw)
    });
    (dx, dw, bias_grad(dout))
}
