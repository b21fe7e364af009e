//! Entropy models and their fixed-point coding tables.
//!
//! Both latents are coded as centred integers (`round(v - mean)`) under a
//! zero-mean discretized Gaussian. Scales are snapped to a geometric table so
//! encoder and decoder select identical CDFs from identical model outputs.
//! Each CDF covers `[-ceil(8 s), ceil(8 s)]` plus one escape symbol; escaped
//! values follow as raw bits.

use std::sync::OnceLock;

use crate::codec::quantize::QuantizedLatent;
use crate::codec::range_coder::{RangeDecoder, RangeEncoder, PROB_TOTAL};
use crate::error::{Error, Result};
use crate::nn::graph::{gaussian_bin_probability, LIKELIHOOD_FLOOR};
use crate::nn::Tensor;

/// Lower bound on every Gaussian scale.
pub const SCALE_FLOOR: f64 = 1e-2;
/// Tables cover `t` standard deviations on either side.
pub const TAIL_WIDTH: f64 = 8.0;
pub const SCALE_MAX: f64 = 256.0;
const SCALE_RATIO: f64 = 1.05;
const ESCAPE_LENGTH_BITS: u32 = 5;

/// One fixed-point CDF. Index `i` in `0..2K+1` codes symbol `i - K`; index
/// `2K+1` is the escape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfTable {
    half_width: i32,
    cdf: Vec<u32>,
}

impl CdfTable {
    /// Quantizes `probs` (symbols then escape) to frequencies summing to
    /// [`PROB_TOTAL`], each at least 1. The rounding surplus or deficit is
    /// absorbed by the most probable entry.
    pub fn from_probabilities(half_width: i32, probs: &[f64]) -> Self {
        assert_eq!(probs.len(), 2 * half_width as usize + 2);
        let total = PROB_TOTAL as i64;
        let mut freqs: Vec<i64> = probs
            .iter()
            .map(|&p| ((p * total as f64).round() as i64).max(1))
            .collect();
        let sum: i64 = freqs.iter().sum();
        let argmax = (0..freqs.len()).max_by_key(|&i| (freqs[i], usize::MAX - i)).unwrap();
        freqs[argmax] += total - sum;
        if freqs[argmax] < 1 {
            // Too many unit floors: flatten the excess across the largest entries.
            let mut deficit = 1 - freqs[argmax];
            freqs[argmax] = 1;
            let mut order: Vec<usize> = (0..freqs.len()).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(freqs[i]));
            for i in order {
                let take = (freqs[i] - 1).min(deficit);
                freqs[i] -= take;
                deficit -= take;
                if deficit == 0 {
                    break;
                }
            }
        }
        let mut cdf = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u32;
        cdf.push(0);
        for f in freqs {
            acc += f as u32;
            cdf.push(acc);
        }
        debug_assert_eq!(acc, PROB_TOTAL);
        Self { half_width, cdf }
    }

    /// Table for a zero-mean discretized Gaussian of scale `scale`.
    pub fn gaussian(scale: f64) -> Self {
        let k = (TAIL_WIDTH * scale).ceil().max(1.0) as i32;
        let mut probs: Vec<f64> = (-k..=k)
            .map(|s| gaussian_bin_probability(s as f64, 0.0, scale))
            .collect();
        let inside: f64 = probs.iter().sum();
        probs.push((1.0 - inside).max(0.0));
        Self::from_probabilities(k, &probs)
    }

    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    pub fn escape_index(&self) -> usize {
        2 * self.half_width as usize + 1
    }

    pub fn cdf(&self) -> &[u32] {
        &self.cdf
    }

    pub fn frequency(&self, index: usize) -> u32 {
        self.cdf[index + 1] - self.cdf[index]
    }

    /// Index of the table entry coding `symbol` (the escape when out of range).
    pub fn index_of(&self, symbol: i32) -> usize {
        if symbol.abs() <= self.half_width {
            (symbol + self.half_width) as usize
        } else {
            self.escape_index()
        }
    }

    fn lookup(&self, target: u32) -> usize {
        // Last index whose cumulative start is <= target.
        self.cdf.partition_point(|&c| c <= target) - 1
    }
}

/// The shared scale grid and its CDFs, built once per process.
#[derive(Debug)]
pub struct EntropyTables {
    levels: Vec<f64>,
    tables: Vec<CdfTable>,
}

impl EntropyTables {
    fn build() -> Self {
        let count = ((SCALE_MAX / SCALE_FLOOR).ln() / SCALE_RATIO.ln()).ceil() as usize + 1;
        let levels: Vec<f64> = (0..count)
            .map(|i| SCALE_FLOOR * SCALE_RATIO.powi(i as i32))
            .collect();
        let tables = levels.iter().map(|&s| CdfTable::gaussian(s)).collect();
        Self { levels, tables }
    }

    pub fn shared() -> &'static EntropyTables {
        static TABLES: OnceLock<EntropyTables> = OnceLock::new();
        TABLES.get_or_init(Self::build)
    }

    /// Nearest grid level in the log domain.
    pub fn scale_index(&self, scale: f64) -> usize {
        if !(scale > SCALE_FLOOR) {
            return 0;
        }
        let idx = ((scale / SCALE_FLOOR).ln() / SCALE_RATIO.ln()).round() as usize;
        idx.min(self.levels.len() - 1)
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn table(&self, index: usize) -> &CdfTable {
        &self.tables[index]
    }
}

/// Per-channel zero-mean Gaussians for the hyper-latent, centred on learned
/// per-channel medians.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedPrior {
    pub medians: Vec<f32>,
    pub scales: Vec<f32>,
}

impl FactorizedPrior {
    pub fn channels(&self) -> usize {
        self.medians.len()
    }

    pub fn median_tensor(&self, height: usize, width: usize) -> Tensor<f32> {
        Tensor::from_fn([self.channels(), height, width], |c, _, _| self.medians[c])
    }

    pub fn scale_tensor(&self, height: usize, width: usize) -> Tensor<f32> {
        Tensor::from_fn([self.channels(), height, width], |c, _, _| self.scales[c])
    }
}

/// How each symbol of a latent is distributed.
#[derive(Clone, Copy, Debug)]
pub enum EntropyModel<'a> {
    /// Hyper-latent prior: one scale per channel.
    Factorized(&'a FactorizedPrior),
    /// Conditional Gaussian: one predicted scale per element.
    Gaussian { scales: &'a Tensor<f32> },
}

impl EntropyModel<'_> {
    fn scale_at(&self, shape: [usize; 3], i: usize) -> f64 {
        match self {
            Self::Factorized(p) => p.scales[i / (shape[1] * shape[2])] as f64,
            Self::Gaussian { scales } => scales.data()[i] as f64,
        }
    }

    fn check_shape(&self, shape: [usize; 3]) -> Result<()> {
        let ok = match self {
            Self::Factorized(p) => p.channels() == shape[0],
            Self::Gaussian { scales } => scales.shape() == shape,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "entropy model does not cover symbols of shape {shape:?}"
            )))
        }
    }

    /// Table index for every symbol position.
    pub fn table_indices(&self, shape: [usize; 3]) -> Result<Vec<usize>> {
        self.check_shape(shape)?;
        let tables = EntropyTables::shared();
        Ok((0..shape.iter().product())
            .map(|i| tables.scale_index(self.scale_at(shape, i)))
            .collect())
    }
}

/// Model information content `sum -log2 P(s)`, with `P` the Gaussian mass of
/// `[s - 0.5, s + 0.5]` (floored as in training).
pub fn estimate_rate(symbols: &QuantizedLatent, model: EntropyModel<'_>) -> Result<f64> {
    model.check_shape(symbols.shape())?;
    let shape = symbols.shape();
    let mut bits = 0.0;
    for (i, &s) in symbols.symbols().iter().enumerate() {
        let scale = model.scale_at(shape, i).max(SCALE_FLOOR);
        let p = gaussian_bin_probability(s as f64, 0.0, scale);
        let b = -p.max(LIKELIHOOD_FLOOR).log2();
        if !b.is_finite() {
            return Err(Error::NonFinite(format!("likelihood of symbol {i}")));
        }
        bits += b;
    }
    Ok(bits)
}

fn checksum(symbols: &[i32]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for s in symbols {
        for b in s.to_le_bytes() {
            h ^= b as u32;
            h = h.wrapping_mul(0x0100_0193);
        }
    }
    (h ^ (h >> 16)) & 0xFFFF
}

fn encode_escape(enc: &mut RangeEncoder, symbol: i32, half_width: i32) {
    let excess = symbol.unsigned_abs() - half_width as u32 - 1;
    let v = excess as u64 + 1;
    let n = 63 - v.leading_zeros();
    enc.encode_bits(n, ESCAPE_LENGTH_BITS);
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(16);
        remaining -= take;
        enc.encode_bits(((v >> remaining) & ((1 << take) - 1)) as u32, take);
    }
    enc.encode_bits((symbol < 0) as u32, 1);
}

fn decode_escape(dec: &mut RangeDecoder<'_>, half_width: i32) -> Result<i32> {
    let n = dec.decode_bits(ESCAPE_LENGTH_BITS)?;
    if n > 30 {
        return Err(Error::CorruptStream(format!("escape length {n} out of range")));
    }
    let mut v: u64 = 1;
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(16);
        remaining -= take;
        v = (v << take) | dec.decode_bits(take)? as u64;
    }
    let magnitude = v - 1 + half_width as u64 + 1;
    if magnitude > i32::MAX as u64 {
        return Err(Error::CorruptStream("escaped symbol overflows".into()));
    }
    let negative = dec.decode_bits(1)? == 1;
    Ok(if negative {
        -(magnitude as i32)
    } else {
        magnitude as i32
    })
}

/// Range-codes `symbols`, symbol `i` under table `indices[i]`, followed by a
/// 16-bit integrity check.
pub fn encode_symbols(symbols: &[i32], indices: &[usize]) -> Result<Vec<u8>> {
    if symbols.len() != indices.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} symbols but {} table indices",
            symbols.len(),
            indices.len()
        )));
    }
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    let tables = EntropyTables::shared();
    let mut enc = RangeEncoder::new();
    for (&s, &ti) in symbols.iter().zip(indices) {
        let table = tables.table(ti);
        let idx = table.index_of(s);
        enc.encode(table.cdf[idx], table.frequency(idx));
        if idx == table.escape_index() {
            encode_escape(&mut enc, s, table.half_width);
        }
    }
    enc.encode_bits(checksum(symbols), 16);
    Ok(enc.finish())
}

/// Inverse of [`encode_symbols`]. Fails on any inconsistency instead of
/// returning altered symbols.
pub fn decode_symbols(bytes: &[u8], indices: &[usize]) -> Result<Vec<i32>> {
    if indices.is_empty() {
        if !bytes.is_empty() {
            return Err(Error::CorruptStream("payload for an empty latent".into()));
        }
        return Ok(Vec::new());
    }
    let tables = EntropyTables::shared();
    let mut dec = RangeDecoder::new(bytes);
    let mut out = Vec::with_capacity(indices.len());
    for &ti in indices {
        let table = tables.table(ti);
        let idx = table.lookup(dec.target()?);
        dec.consume(table.cdf[idx], table.frequency(idx));
        let s = if idx == table.escape_index() {
            decode_escape(&mut dec, table.half_width)?
        } else {
            idx as i32 - table.half_width
        };
        out.push(s);
    }
    let check = dec.decode_bits(16)?;
    if check != checksum(&out) {
        return Err(Error::CorruptStream("payload integrity check failed".into()));
    }
    dec.finish()?;
    Ok(out)
}

/// Codes a quantized latent under `model`.
pub fn range_encode(symbols: &QuantizedLatent, model: EntropyModel<'_>) -> Result<Vec<u8>> {
    let indices = model.table_indices(symbols.shape())?;
    encode_symbols(symbols.symbols(), &indices)
}

pub fn range_decode(bytes: &[u8], model: EntropyModel<'_>, shape: [usize; 3]) -> Result<QuantizedLatent> {
    let indices = model.table_indices(shape)?;
    QuantizedLatent::new(shape, decode_symbols(bytes, &indices)?)
}
