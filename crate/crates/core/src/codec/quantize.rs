//! Quantization: additive uniform noise while training, mean-centred
//! rounding (ties away from zero) at inference.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Integer symbols with the shape of the latent they were taken from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedLatent {
    shape: [usize; 3],
    symbols: Vec<i32>,
}

impl QuantizedLatent {
    pub fn new(shape: [usize; 3], symbols: Vec<i32>) -> Result<Self> {
        if symbols.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "{} symbols for shape {shape:?}",
                symbols.len()
            )));
        }
        Ok(Self { shape, symbols })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            symbols: vec![0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn symbols(&self) -> &[i32] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `symbol + offset` as a real latent.
    pub fn dequantize(&self, offset: Option<&Tensor<f32>>) -> Result<Tensor<f32>> {
        let data = match offset {
            Some(o) => {
                if o.shape() != self.shape {
                    return Err(Error::ShapeMismatch(format!(
                        "offset {:?} vs symbols {:?}",
                        o.shape(),
                        self.shape
                    )));
                }
                self.symbols
                    .iter()
                    .zip(o.data())
                    .map(|(&s, &m)| s as f32 + m)
                    .collect()
            }
            None => self.symbols.iter().map(|&s| s as f32).collect(),
        };
        Ok(Tensor::from_vec(self.shape, data))
    }
}

/// Nearest integer, ties away from zero.
#[inline]
pub fn round_half_away(v: f32) -> i32 {
    v.round() as i32
}

/// Inference quantization: `round(t - offset)`. The returned symbols are the
/// centred integers; the offset is re-added by [`QuantizedLatent::dequantize`].
pub fn quantize(t: &Tensor<f32>, offset: Option<&Tensor<f32>>) -> Result<QuantizedLatent> {
    if let Some(o) = offset {
        if o.shape() != t.shape() {
            return Err(Error::ShapeMismatch(format!(
                "offset {:?} vs latent {:?}",
                o.shape(),
                t.shape()
            )));
        }
    }
    let mut symbols = Vec::with_capacity(t.len());
    for (i, &v) in t.data().iter().enumerate() {
        let centred = v - offset.map_or(0.0, |o| o.data()[i]);
        if !centred.is_finite() {
            return Err(Error::NonFinite(format!("latent element {i} is {centred}")));
        }
        symbols.push(round_half_away(centred));
    }
    QuantizedLatent::new(t.shape(), symbols)
}

/// Training surrogate: i.i.d. noise in `[-0.5, 0.5)`.
pub fn uniform_noise<R: Rng>(shape: [usize; 3], rng: &mut R) -> Tensor<f32> {
    Tensor::from_fn(shape, |_, _, _| rng.gen_range(-0.5f32..0.5))
}

/// Adds training noise to `t`.
pub fn quantize_train<R: Rng>(t: &Tensor<f32>, rng: &mut R) -> Tensor<f32> {
    let noise = uniform_noise(t.shape(), rng);
    t.zip_map(&noise, |a, b| a + b)
}
