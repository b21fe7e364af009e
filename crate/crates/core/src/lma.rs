//! Latent mask attention: the mask representation (MR) and importance
//! generation (IG) sub-modules and the ways their outputs rescale the latent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv2d, Graph, ParamStore, ResidualBlock, Scalar, Tensor, Var};
use crate::tma::resize_bilinear;

/// How the spatial prior `l`, RDO prior `i` and latent `y` combine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fusion {
    /// `(l + i) * y`
    #[default]
    #[serde(rename = "A+M")]
    AddMul,
    /// `l * i * y`
    #[serde(rename = "M+M")]
    MulMul,
    /// `l + i + y`
    #[serde(rename = "A+A")]
    AddAdd,
}

impl std::str::FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A+M" | "AM" => Ok(Self::AddMul),
            "M+M" | "MM" => Ok(Self::MulMul),
            "A+A" | "AA" => Ok(Self::AddAdd),
            other => Err(Error::InvalidInput(format!("unknown fusion {other:?}"))),
        }
    }
}

impl std::fmt::Display for Fusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AddMul => "A+M",
            Self::MulMul => "M+M",
            Self::AddAdd => "A+A",
        })
    }
}

impl Fusion {
    pub fn apply<T: Scalar>(self, g: &mut Graph<'_, T>, l: Var, i: Var, y: Var) -> Var {
        match self {
            Self::AddMul => {
                let s = g.add(l, i);
                g.mul(s, y)
            }
            Self::MulMul => {
                let s = g.mul(l, i);
                g.mul(s, y)
            }
            Self::AddAdd => {
                let s = g.add(l, i);
                g.add(s, y)
            }
        }
    }
}

/// Mask representation variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPrior {
    /// Three stride-2 convolutions and a sigmoid.
    #[default]
    Learned,
    /// Bilinear downsampling of the mask, repeated over channels.
    Interpolated,
}

/// MR: `1 x H/2 x W/2` mask to `C x H/16 x W/16` spatial prior in `(0, 1)`.
#[derive(Clone, Debug)]
pub struct MaskRepresentation {
    convs: [Conv2d; 3],
    channels: usize,
}

impl MaskRepresentation {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, prefix: &str, channels: usize, rng: &mut R) -> Self {
        let half = (channels / 2).max(1);
        let convs = [
            Conv2d::new(store, &format!("{prefix}.conv0"), 1, half, 3, 2, rng),
            Conv2d::new(store, &format!("{prefix}.conv1"), half, channels, 3, 2, rng),
            Conv2d::new(store, &format!("{prefix}.conv2"), channels, channels, 3, 2, rng),
        ];
        store.get_mut(convs[2].bias).data_mut().fill(T::ZERO);
        Self { convs, channels }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Any `1 x H x W` input is accepted; the output is `ceil` three times
    /// halved.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, m: Var) -> Result<Var> {
        let [c, h, w] = g.shape(m);
        if c != 1 || h == 0 || w == 0 {
            return Err(Error::ShapeMismatch(format!("mask must be 1 x H x W, got {c}x{h}x{w}")));
        }
        let mut t = self.convs[0].forward(g, m);
        t = g.relu(t);
        t = self.convs[1].forward(g, t);
        t = g.relu(t);
        t = self.convs[2].forward(g, t);
        Ok(g.sigmoid(t))
    }
}

fn check_mask_shape([c, h, w]: [usize; 3]) -> Result<()> {
    if c != 1 || h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
        return Err(Error::ShapeMismatch(format!(
            "mask must be 1 x H x W with H, W multiples of 8, got {c}x{h}x{w}"
        )));
    }
    Ok(())
}

/// The parameter-free MR ablation.
pub fn interpolated_prior(m: &Tensor<f32>, channels: usize) -> Result<Tensor<f32>> {
    check_mask_shape(m.shape())?;
    let (h, w) = (m.height(), m.width());
    let small = resize_bilinear(m.data(), h, w, h / 8, w / 8);
    Ok(Tensor::from_fn([channels, h / 8, w / 8], |_, i, j| small[i * (w / 8) + j]))
}

/// IG: conv, tanh, three residual blocks, zero-initialized conv, softsign.
#[derive(Clone, Debug)]
pub struct ImportanceGenerator {
    head: Conv2d,
    blocks: [ResidualBlock; 3],
    tail: Conv2d,
    channels: usize,
}

impl ImportanceGenerator {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, prefix: &str, channels: usize, rng: &mut R) -> Self {
        let head = Conv2d::new(store, &format!("{prefix}.head"), channels, channels, 3, 1, rng);
        let blocks = [0, 1, 2].map(|k| ResidualBlock::new(store, &format!("{prefix}.res{k}"), channels, rng));
        let tail = Conv2d::new(store, &format!("{prefix}.tail"), channels, channels, 3, 1, rng);
        store.get_mut(tail.weight).data_mut().fill(T::ZERO);
        store.get_mut(tail.bias).data_mut().fill(T::ZERO);
        Self { head, blocks, tail, channels }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, f: Var) -> Result<Var> {
        let shape = g.shape(f);
        if shape[0] != self.channels {
            return Err(Error::ShapeMismatch(format!(
                "IG expects {} channels, got {shape:?}",
                self.channels
            )));
        }
        let mut t = self.head.forward(g, f);
        t = g.tanh(t);
        for b in &self.blocks {
            t = b.forward(g, t);
        }
        t = self.tail.forward(g, t);
        Ok(g.softsign(t))
    }
}

fn same_shape(a: &Tensor<f32>, b: &Tensor<f32>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Attention map `s = l + i`.
pub fn fuse(l: &Tensor<f32>, i: &Tensor<f32>) -> Result<Tensor<f32>> {
    same_shape(l, i, "fuse")?;
    Ok(l.zip_map(i, |a, b| a + b))
}

/// `y * s`, element-wise.
pub fn optimize_latent(y: &Tensor<f32>, s: &Tensor<f32>) -> Result<Tensor<f32>> {
    same_shape(y, s, "optimize_latent")?;
    Ok(y.zip_map(s, |a, b| a * b))
}

pub fn fuse_ablation_variant(kind: Fusion, l: &Tensor<f32>, i: &Tensor<f32>, y: &Tensor<f32>) -> Result<Tensor<f32>> {
    same_shape(l, i, "fusion")?;
    same_shape(l, y, "fusion")?;
    Ok(match kind {
        Fusion::AddMul => optimize_latent(y, &fuse(l, i)?)?,
        Fusion::MulMul => Tensor::from_fn(y.shape(), |c, h, w| l.get(c, h, w) * i.get(c, h, w) * y.get(c, h, w)),
        Fusion::AddAdd => Tensor::from_fn(y.shape(), |c, h, w| l.get(c, h, w) + i.get(c, h, w) + y.get(c, h, w)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mr_shape_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f32>::new();
        let mr = MaskRepresentation::new(&mut store, "mr", 64, &mut rng);
        let mut g = Graph::new(&store);
        let m = g.input(Tensor::from_fn([1, 128, 128], |_, h, w| if (h / 9 + w / 13) % 2 == 0 { 1.0 } else { 0.1 }));
        let l = mr.forward(&mut g, m).unwrap();
        assert_eq!(g.shape(l), [64, 16, 16]);
        assert!(g.value(l).data().iter().all(|&v| v > 0.0 && v < 1.0));
        let odd = g.input(Tensor::zeros([1, 5, 5]));
        let out = mr.forward(&mut g, odd).unwrap();
        assert_eq!(g.shape(out), [64, 1, 1]);
        let bad = g.input(Tensor::zeros([2, 16, 16]));
        assert!(mr.forward(&mut g, bad).is_err());
    }

    #[test]
    fn mr_constant_mask_gives_constant_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::<f32>::new();
        let mr = MaskRepresentation::new(&mut store, "mr", 8, &mut rng);
        let run = |sigma: f32| {
            let mut g = Graph::new(&store);
            let m = g.input(Tensor::full([1, 128, 128], sigma));
            let l = mr.forward(&mut g, m).unwrap();
            g.value(l).clone()
        };
        let l = run(0.3);
        for c in 0..8 {
            for h in 1..15 {
                for w in 2..15 {
                    assert!((l.get(c, h, w) - l.get(c, h, 1)).abs() < 1e-6);
                }
            }
        }
        assert_ne!(l, run(0.9));
    }

    #[test]
    fn ig_starts_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f32>::new();
        let ig = ImportanceGenerator::new(&mut store, "ig", 16, &mut rng);
        let mut g = Graph::new(&store);
        let f = g.input(Tensor::from_fn([16, 4, 4], |c, h, w| (c + h * w) as f32 - 3.0));
        let i = ig.forward(&mut g, f).unwrap();
        assert_eq!(g.shape(i), [16, 4, 4]);
        assert!(g.value(i).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fusion_arithmetic() {
        let l = Tensor::from_vec([1, 1, 2], vec![0.9f32, 0.5]);
        let i = Tensor::from_vec([1, 1, 2], vec![-0.2f32, 0.0]);
        let s = fuse(&l, &i).unwrap();
        assert!((s.data()[0] - 0.7).abs() < 1e-7 && s.data()[1] == 0.5);
        assert_eq!(fuse(&i, &l).unwrap(), s);
        let y = Tensor::from_vec([1, 1, 2], vec![3.0f32, -2.0]);
        assert_eq!(optimize_latent(&y, &Tensor::full([1, 1, 2], 1.0)).unwrap(), y);
        assert!(optimize_latent(&y, &Tensor::zeros([1, 1, 2])).unwrap().data().iter().all(|&v| v == 0.0));
        let one = Tensor::full([1, 1, 2], 1.0);
        let zero = Tensor::zeros([1, 1, 2]);
        assert_eq!(fuse_ablation_variant(Fusion::AddMul, &one, &zero, &y).unwrap(), y);
        assert!(fuse_ablation_variant(Fusion::MulMul, &one, &zero, &y).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(fuse_ablation_variant(Fusion::AddAdd, &zero, &zero, &y).unwrap(), y);
        assert!(fuse(&l, &Tensor::zeros([1, 2, 1])).is_err());
    }

    #[test]
    fn interpolated_prior_is_a_channel_repeat() {
        let m = Tensor::from_fn([1, 16, 16], |_, h, _| if h < 8 { 1.0 } else { 0.2 });
        let p = interpolated_prior(&m, 4).unwrap();
        assert_eq!(p.shape(), [4, 2, 2]);
        assert_eq!(p.get(3, 0, 1), 1.0);
        assert!((p.get(0, 1, 0) - 0.2).abs() < 1e-7);
    }
}
