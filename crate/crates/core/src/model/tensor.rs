//! Minimal channel-major 1-D tensors and the differentiable primitives the
//! network is built from.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rustfft::FftNum;

use crate::error::{Error, Result};

/// Scalar type the network can run in. `f32` for training and inference,
/// `f64` for gradient verification.
pub trait Real: Float + FftNum + FromPrimitive + Sum + Default + Debug + Send + Sync + 'static {
    /// `c = alpha * a @ b + beta * c` with explicit strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }
}

macro_rules! impl_real {
    ($t:ty, $kernel:ident) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                (rsa, csa): (isize, isize),
                b: &[Self],
                (rsb, csb): (isize, isize),
                beta: Self,
                c: &mut [Self],
                (rsc, csc): (isize, isize),
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    (rows.saturating_sub(1) as isize * rs + cols.saturating_sub(1) as isize * cs) as usize + 1
                };
                assert!(k == 0 || a.len() >= span(m, k, rsa, csa), "gemm: lhs too short");
                assert!(k == 0 || b.len() >= span(k, n, rsb, csb), "gemm: rhs too short");
                assert!(c.len() >= span(m, n, rsc, csc), "gemm: output too short");
                // SAFETY: every slice covers the strided extent checked above.
                unsafe {
                    matrixmultiply::$kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }
        }
    };
}

impl_real!(f32, sgemm);
impl_real!(f64, dgemm);

/// `channels x len` row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![T::zero(); channels * len],
        }
    }

    pub fn from_vec(channels: usize, len: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {channels}x{len} tensor",
                data.len()
            )));
        }
        Ok(Self { channels, len, data })
    }

    pub fn row(&self, c: usize) -> &[T] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    /// Stack channels of `self` on top of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.len != other.len {
            return Err(Error::ShapeMismatch(format!(
                "concat lengths {} and {}",
                self.len, other.len
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            channels: self.channels + other.channels,
            len: self.len,
            data,
        })
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }
}

/// Output length and left padding for "same-ceil" convolution.
pub fn conv_geometry(len: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out.saturating_sub(1)) * stride + kernel).saturating_sub(len);
    (out, total / 2)
}

/// Borrowed convolution weights: `kernel[o][i][j]` flattened, plus bias.
#[derive(Debug, Clone, Copy)]
pub struct ConvWeights<'a, T> {
    pub kernel: &'a [T],
    pub bias: &'a [T],
    pub out_channels: usize,
    pub in_channels: usize,
    pub width: usize,
}

impl<T: Real> ConvWeights<'_, T> {
    fn check(&self, input: &Tensor<T>) -> Result<()> {
        if input.channels != self.in_channels
            || self.kernel.len() != self.out_channels * self.in_channels * self.width
            || self.bias.len() != self.out_channels
        {
            return Err(Error::ShapeMismatch(format!(
                "conv {}->{}x{} applied to {} channels",
                self.in_channels, self.out_channels, self.width, input.channels
            )));
        }
        Ok(())
    }
}

/// Unfold `input` into a `(in_channels * width) x out_len` patch matrix.
fn im2col<T: Real>(input: &Tensor<T>, width: usize, stride: usize) -> (Vec<T>, usize) {
    let (out_len, pad) = conv_geometry(input.len, width, stride);
    let mut cols = vec![T::zero(); input.channels * width * out_len];
    for i in 0..input.channels {
        let row = input.row(i);
        for j in 0..width {
            let dst = &mut cols[(i * width + j) * out_len..(i * width + j + 1) * out_len];
            for (t, d) in dst.iter_mut().enumerate() {
                let src = (t * stride + j) as isize - pad as isize;
                if src >= 0 && (src as usize) < input.len {
                    *d = row[src as usize];
                }
            }
        }
    }
    (cols, out_len)
}

fn col2im<T: Real>(cols: &[T], channels: usize, len: usize, width: usize, stride: usize) -> Tensor<T> {
    let (out_len, pad) = conv_geometry(len, width, stride);
    let mut grad = Tensor::zeros(channels, len);
    for i in 0..channels {
        let row = grad.row_mut(i);
        for j in 0..width {
            let src = &cols[(i * width + j) * out_len..(i * width + j + 1) * out_len];
            for (t, &g) in src.iter().enumerate() {
                let dst = (t * stride + j) as isize - pad as isize;
                if dst >= 0 && (dst as usize) < len {
                    row[dst as usize] = row[dst as usize] + g;
                }
            }
        }
    }
    grad
}

/// Strided 1-D convolution with symmetric "same-ceil" zero padding:
/// output length is `ceil(len / stride)`.
pub fn conv1d<T: Real>(input: &Tensor<T>, w: ConvWeights<'_, T>, stride: usize) -> Result<Tensor<T>> {
    w.check(input)?;
    let (cols, out_len) = im2col(input, w.width, stride);
    let mut out = Tensor::zeros(w.out_channels, out_len);
    for (o, &b) in w.bias.iter().enumerate() {
        out.row_mut(o).iter_mut().for_each(|v| *v = b);
    }
    let depth = w.in_channels * w.width;
    T::gemm(
        w.out_channels,
        depth,
        out_len,
        T::one(),
        w.kernel,
        (depth as isize, 1),
        &cols,
        (out_len as isize, 1),
        T::one(),
        &mut out.data,
        (out_len as isize, 1),
    );
    Ok(out)
}

/// Gradients of [`conv1d`]: returns the input gradient and accumulates into
/// `grad_kernel` / `grad_bias`.
pub fn conv1d_backward<T: Real>(
    input: &Tensor<T>,
    w: ConvWeights<'_, T>,
    stride: usize,
    grad_out: &Tensor<T>,
    grad_kernel: &mut [T],
    grad_bias: &mut [T],
) -> Tensor<T> {
    let (cols, out_len) = im2col(input, w.width, stride);
    debug_assert_eq!(out_len, grad_out.len);
    let depth = w.in_channels * w.width;
    for (o, gb) in grad_bias.iter_mut().enumerate() {
        *gb = *gb + grad_out.row(o).iter().copied().sum::<T>();
    }
    // dK = dY @ cols^T
    T::gemm(
        w.out_channels,
        out_len,
        depth,
        T::one(),
        &grad_out.data,
        (out_len as isize, 1),
        &cols,
        (1, out_len as isize),
        T::one(),
        grad_kernel,
        (depth as isize, 1),
    );
    // dcols = K^T @ dY
    let mut grad_cols = vec![T::zero(); depth * out_len];
    T::gemm(
        depth,
        w.out_channels,
        out_len,
        T::one(),
        w.kernel,
        (1, depth as isize),
        &grad_out.data,
        (out_len as isize, 1),
        T::zero(),
        &mut grad_cols,
        (out_len as isize, 1),
    );
    col2im(&grad_cols, input.channels, input.len, w.width, stride)
}

/// Linear-interpolation upsampling by two; the final odd slot repeats the
/// last input value.
pub fn upsample2<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let half = T::lit(0.5);
    let mut out = Tensor::zeros(input.channels, input.len * 2);
    for c in 0..input.channels {
        let src = input.row(c);
        let dst = out.row_mut(c);
        for i in 0..src.len() {
            dst[2 * i] = src[i];
            dst[2 * i + 1] = match src.get(i + 1) {
                Some(&next) => (src[i] + next) * half,
                None => src[i],
            };
        }
    }
    out
}

pub fn upsample2_backward<T: Real>(grad_out: &Tensor<T>) -> Tensor<T> {
    let half = T::lit(0.5);
    let len = grad_out.len / 2;
    let mut grad = Tensor::zeros(grad_out.channels, len);
    for c in 0..grad_out.channels {
        let g = grad_out.row(c);
        let dst = grad.row_mut(c);
        for i in 0..len {
            dst[i] = dst[i] + g[2 * i];
            if i + 1 < len {
                dst[i] = dst[i] + g[2 * i + 1] * half;
                dst[i + 1] = dst[i + 1] + g[2 * i + 1] * half;
            } else {
                dst[i] = dst[i] + g[2 * i + 1];
            }
        }
    }
    grad
}

pub fn leaky_relu<T: Real>(x: &mut Tensor<T>, slope: T) {
    for v in &mut x.data {
        if *v < T::zero() {
            *v = *v * slope;
        }
    }
}

/// Multiply `grad` by the LeakyReLU derivative, read off the activation's
/// output (the sign is preserved because the slope is positive).
pub fn leaky_relu_backward<T: Real>(activated: &Tensor<T>, grad: &mut Tensor<T>, slope: T) {
    for (g, &a) in grad.data.iter_mut().zip(&activated.data) {
        if a < T::zero() {
            *g = *g * slope;
        }
    }
}
