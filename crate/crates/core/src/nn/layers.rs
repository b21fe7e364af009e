//! Parameterized layers. A layer only stores [`ParamId`]s; values live in the
//! shared [`ParamStore`].

use rand::Rng;

use super::conv::ConvGeometry;
use super::graph::{Graph, ParamId, ParamStore, Var};
use super::tensor::{Scalar, Tensor};

fn uniform<T: Scalar, R: Rng>(shape: [usize; 3], bound: f64, rng: &mut R) -> Tensor<T> {
    Tensor::from_fn(shape, |_, _, _| T::from_f64(rng.gen_range(-bound..=bound)))
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub geometry: ConvGeometry,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv2d {
    /// `k x k` convolution with "same"-style padding `k / 2`, uniform
    /// fan-in initialization.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((in_channels * kernel * kernel) as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            uniform([out_channels, in_channels, kernel * kernel], bound, rng),
        );
        let bias = store.add(format!("{name}.bias"), uniform([out_channels, 1, 1], bound, rng));
        Self {
            weight,
            bias,
            geometry: ConvGeometry::new(kernel, stride, kernel / 2),
            in_channels,
            out_channels,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        g.conv2d(x, w, Some(b), self.geometry)
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub geometry: ConvGeometry,
    pub output_padding: usize,
}

impl ConvTranspose2d {
    /// Upsamples by `stride` exactly (padding `k / 2`, output padding
    /// `stride - 1`).
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((in_channels * kernel * kernel) as f64 / (stride * stride) as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            uniform([in_channels, out_channels, kernel * kernel], bound, rng),
        );
        let bias = store.add(format!("{name}.bias"), uniform([out_channels, 1, 1], bound, rng));
        Self {
            weight,
            bias,
            geometry: ConvGeometry::new(kernel, stride, kernel / 2),
            output_padding: stride - 1,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        g.conv_transpose2d(x, w, Some(b), self.geometry, self.output_padding)
    }
}

/// GDN / IGDN with the non-negative reparameterization
/// `gamma = gamma_p^2`, `beta = beta_p^2 + 1e-6`.
#[derive(Clone, Debug)]
pub struct Gdn {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub inverse: bool,
}

impl Gdn {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize, inverse: bool) -> Self {
        let g0 = T::from_f64(0.1f64.sqrt());
        let gamma = store.add(
            format!("{name}.gamma"),
            Tensor::from_fn([channels, channels, 1], |i, j, _| if i == j { g0 } else { T::ZERO }),
        );
        let beta = store.add(format!("{name}.beta"), Tensor::full([channels, 1, 1], T::ONE));
        Self {
            gamma,
            beta,
            inverse,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let gp = g.param(self.gamma);
        let gamma = g.square(gp);
        let bp = g.param(self.beta);
        let b2 = g.square(bp);
        let beta = g.add_scalar(b2, 1e-6);
        g.gdn(x, gamma, beta, self.inverse)
    }
}

/// Identity-skip block: `x + conv(relu(conv(x)))`, 3x3 kernels.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub first: Conv2d,
    pub second: Conv2d,
}

impl ResidualBlock {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, name: &str, channels: usize, rng: &mut R) -> Self {
        Self {
            first: Conv2d::new(store, &format!("{name}.conv1"), channels, channels, 3, 1, rng),
            second: Conv2d::new(store, &format!("{name}.conv2"), channels, channels, 3, 1, rng),
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let h = self.first.forward(g, x);
        let h = g.relu(h);
        let h = self.second.forward(g, h);
        g.add(x, h)
    }
}
