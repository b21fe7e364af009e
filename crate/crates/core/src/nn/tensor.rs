//! Dense CHW tensors and the floating-point scalar abstraction used by the
//! network engine.

use std::fmt::Debug;

use float::Float;

/// Minimal float abstraction: `f32` for training and inference, `f64` for
/// finite-difference gradient checks.
pub trait Scalar:
    Copy
    + Default
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::iter::Sum
    + Float
{
    /// `c = alpha * a * b + beta * c`, all matrices row-major with explicit strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
    );
}

/// Float operations the engine needs from `f32`/`f64`.
pub mod float {
    pub trait Float: Sized {
        const ZERO: Self;
        const ONE: Self;
        fn from_f64(v: f64) -> Self;
        fn to_f64(self) -> f64;
        fn exp(self) -> Self;
        fn ln(self) -> Self;
        fn sqrt(self) -> Self;
        fn tanh(self) -> Self;
        fn abs(self) -> Self;
        fn max(self, other: Self) -> Self;
        fn min(self, other: Self) -> Self;
    }
}

macro_rules! impl_float {
    ($t:ty) => {
        impl float::Float for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn max(self, other: Self) -> Self {
                <$t>::max(self, other)
            }
            #[inline]
            fn min(self, other: Self) -> Self {
                <$t>::min(self, other)
            }
        }
    };
}

impl_float!(f32);
impl_float!(f64);

impl Scalar for f32 {
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        (rsa, csa): (isize, isize),
        b: &[f32],
        (rsb, csb): (isize, isize),
        beta: f32,
        c: &mut [f32],
    ) {
        check_gemm_bounds(m, k, n, a.len(), (rsa, csa), b.len(), (rsb, csb), c.len());
        // SAFETY: bounds checked above; c is row-major m x n and contiguous.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Scalar for f64 {
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        (rsa, csa): (isize, isize),
        b: &[f64],
        (rsb, csb): (isize, isize),
        beta: f64,
        c: &mut [f64],
    ) {
        check_gemm_bounds(m, k, n, a.len(), (rsa, csa), b.len(), (rsb, csb), c.len());
        // SAFETY: bounds checked above; c is row-major m x n and contiguous.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_gemm_bounds(
    m: usize,
    k: usize,
    n: usize,
    a_len: usize,
    (rsa, csa): (isize, isize),
    b_len: usize,
    (rsb, csb): (isize, isize),
    c_len: usize,
) {
    let last = |rows: usize, cols: usize, rs: isize, cs: isize| -> usize {
        if rows == 0 || cols == 0 {
            0
        } else {
            ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
        }
    };
    assert!(last(m, k, rsa, csa) <= a_len, "gemm: lhs out of bounds");
    assert!(last(k, n, rsb, csb) <= b_len, "gemm: rhs out of bounds");
    assert!(m * n <= c_len, "gemm: output out of bounds");
}

/// A channel-major (C, H, W) tensor. Scalars are stored as 1x1x1.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 3],
    data: Vec<T>,
}

impl<T> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?}", self.shape)
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self::full(shape, T::ZERO)
    }

    pub fn full(shape: [usize; 3], value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self::full([1, 1, 1], value)
    }

    /// Panics if `data.len()` does not match the shape.
    pub fn from_vec(shape: [usize; 3], data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "tensor data length does not match shape {shape:?}"
        );
        Self { shape, data }
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for c in 0..shape[0] {
            for h in 0..shape[1] {
                for w in 0..shape[2] {
                    data.push(f(c, h, w));
                }
            }
        }
        Self { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.shape[1]
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape[2]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> T {
        self.data[(c * self.shape[1] + h) * self.shape[2] + w]
    }

    #[inline]
    pub fn set(&mut self, c: usize, h: usize, w: usize, v: T) {
        let idx = (c * self.shape[1] + h) * self.shape[2] + w;
        self.data[idx] = v;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn reshape(mut self, shape: [usize; 3]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape;
        self
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape, other.shape, "shape mismatch in zip_map");
        Self {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "shape mismatch in add_assign");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::ZERO, |m, v| m.max(v.abs()))
    }

    /// Splits the channel range `[start, end)` into its own tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Self {
        let plane = self.shape[1] * self.shape[2];
        Self {
            shape: [end - start, self.shape[1], self.shape[2]],
            data: self.data[start * plane..end * plane].to_vec(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}
