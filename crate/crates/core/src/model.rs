//! The complete ROI codec: hyperprior codec plus latent mask attention, with
//! the closed-loop compress/decompress pipeline shared by the CLI and the
//! HTTP service.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::bitstream::{Bitstream, Provenance};
use crate::codec::checkpoint::Checkpoint;
use crate::codec::config::{CodecConfig, HYPER_STRIDE, LATENT_STRIDE};
use crate::codec::entropy::{estimate_rate, range_decode, range_encode, EntropyModel};
use crate::codec::quantize::{quantize, uniform_noise, QuantizedLatent};
use crate::codec::transforms::HyperpriorCodec;
use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::lma::{interpolated_prior, Fusion, ImportanceGenerator, MaskPrior, MaskRepresentation};
use crate::nn::{Graph, ParamId, ParamStore, Scalar, Tensor, Var};
use crate::tma::{upsample_mask, RoiMask};

/// Fixed scale between pixel-domain MSE and the rate-distortion multipliers.
pub const DISTORTION_SCALE: f64 = 255.0 * 255.0;

/// Parameter-name prefixes of the three sub-networks.
pub const CODEC_PREFIX: &str = "codec";
pub const MR_PREFIX: &str = "mr";
pub const IG_PREFIX: &str = "ig";

/// Architecture switches fixed at construction time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelOptions {
    pub fusion: Fusion,
    pub use_ig: bool,
    pub mask_prior: MaskPrior,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelOptions {
    pub fn full() -> Self {
        Self {
            fusion: Fusion::AddMul,
            use_ig: true,
            mask_prior: MaskPrior::Learned,
        }
    }
}

/// Layer handles of the whole model over some parameter store.
#[derive(Clone, Debug)]
pub struct Network {
    pub codec: HyperpriorCodec,
    pub mr: MaskRepresentation,
    pub ig: ImportanceGenerator,
    pub options: ModelOptions,
}

/// Values of one training forward pass.
#[derive(Clone, Copy, Debug)]
pub struct TrainForward {
    pub loss: Var,
    pub distortion: Var,
    pub rate_bpp: Var,
    pub x_hat: Var,
}

impl Network {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        config: &CodecConfig,
        options: ModelOptions,
        rng: &mut R,
    ) -> Self {
        let codec = HyperpriorCodec::new(store, CODEC_PREFIX, config.channels_n, config.channels_m, rng);
        let mr = MaskRepresentation::new(store, MR_PREFIX, config.channels_n, rng);
        let ig = ImportanceGenerator::new(store, IG_PREFIX, config.channels_n, rng);
        Self { codec, mr, ig, options }
    }

    /// `f`, `y` and the attention-scaled `y~`. Without a mask the attention
    /// path is bypassed (`y~ = y`).
    pub fn encode_latent<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        mask: Option<Var>,
    ) -> Result<(Var, Var, Var)> {
        let (f, y) = self.codec.analysis(g, x)?;
        let Some(m) = mask else {
            return Ok((f, y, y));
        };
        let [_, mh, mw] = g.shape(m);
        let [_, h, w] = g.shape(x);
        if (mh * 2, mw * 2) != (h, w) {
            return Err(Error::ShapeMismatch(format!(
                "mask {mh}x{mw} does not match image {h}x{w}"
            )));
        }
        let l = match self.options.mask_prior {
            MaskPrior::Learned => self.mr.forward(g, m)?,
            MaskPrior::Interpolated => {
                let mt = g.value(m).cast::<f32>();
                let prior = interpolated_prior(&mt, self.codec.channels_n())?;
                g.input(prior.cast())
            }
        };
        let i = if self.options.use_ig {
            self.ig.forward(g, f)?
        } else {
            let shape = g.shape(y);
            g.input(Tensor::zeros(shape))
        };
        let y_tilde = self.options.fusion.apply(g, l, i, y);
        Ok((f, y, y_tilde))
    }

    /// Noisy-quantization forward pass and the weighted rate-distortion loss
    /// `lambda * 255^2 * D + R`.
    pub fn forward_train<T: Scalar, R: Rng>(
        &self,
        g: &mut Graph<'_, T>,
        x: &Tensor<T>,
        mask: Option<&RoiMask>,
        lambda: f64,
        rng: &mut R,
    ) -> Result<TrainForward> {
        let [_, h, w] = x.shape();
        let xv = g.input(x.clone());
        let mv = mask.map(|m| g.input(m.to_tensor().cast()));
        let (_, _, y_tilde) = self.encode_latent(g, xv, mv)?;

        let z = self.codec.hyper_analysis(g, y_tilde)?;
        let [_, zh, zw] = g.shape(z);
        let z_noise = g.input(uniform_noise(g.shape(z), rng).cast());
        let z_tilde = g.add(z, z_noise);
        let (z_mean, z_scale) = self.codec.z_prior(g, zh, zw);
        let bits_z = g.gaussian_bits(z_tilde, z_mean, z_scale);

        let (mean, scale) = self.codec.hyper_synthesis(g, z_tilde)?;
        let y_noise = g.input(uniform_noise(g.shape(y_tilde), rng).cast());
        let y_hat = g.add(y_tilde, y_noise);
        let bits_y = g.gaussian_bits(y_hat, mean, scale);
        let x_hat = self.codec.synthesis(g, y_hat)?;

        let diff = g.sub(x_hat, xv);
        let residual = match mask {
            Some(m) => {
                let weights = g.input(upsample_mask(m, h, w)?.cast());
                g.mul(diff, weights)
            }
            None => diff,
        };
        let sq = g.square(residual);
        let distortion = g.mean(sq);
        let bits = g.add(bits_z, bits_y);
        let rate_bpp = g.scale(bits, 1.0 / (h * w) as f64);
        let weighted = g.scale(distortion, lambda * DISTORTION_SCALE);
        let loss = g.add(weighted, rate_bpp);
        Ok(TrainForward {
            loss,
            distortion,
            rate_bpp,
            x_hat,
        })
    }
}

/// Encoder output with everything needed to audit it.
#[derive(Clone, Debug)]
pub struct Compressed {
    pub bitstream: Bitstream,
    pub bytes: Vec<u8>,
    /// Encoder-side reconstruction at the original size.
    pub reconstruction: ImagePlane,
    pub z_symbols: QuantizedLatent,
    pub y_symbols: QuantizedLatent,
    pub estimated_z_bits: f64,
    pub estimated_y_bits: f64,
}

impl Compressed {
    pub fn bpp(&self) -> f64 {
        self.bitstream.bpp()
    }

    pub fn payload_bits(&self) -> usize {
        8 * (self.bitstream.z_payload.len() + self.bitstream.y_payload.len())
    }

    pub fn estimated_bits(&self) -> f64 {
        self.estimated_z_bits + self.estimated_y_bits
    }
}

/// A trained (or freshly initialized) model with its weights.
#[derive(Clone, Debug)]
pub struct RoiCodec {
    config: CodecConfig,
    store: ParamStore<f32>,
    network: Network,
    trained_stage: u8,
}

impl RoiCodec {
    pub fn new(config: CodecConfig, options: ModelOptions, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let network = Network::new(&mut store, &config, options, &mut rng);
        Self {
            config,
            store,
            network,
            trained_stage: 0,
        }
    }

    /// Last completed training stage (0 for a fresh model).
    pub fn trained_stage(&self) -> u8 {
        self.trained_stage
    }

    pub fn set_trained_stage(&mut self, stage: u8) {
        self.trained_stage = stage;
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn options(&self) -> ModelOptions {
        self.network.options
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn store(&self) -> &ParamStore<f32> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.store
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda()
    }

    /// Parameters of one sub-network, by name prefix.
    pub fn params_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        let dotted = format!("{prefix}.");
        self.store
            .ids()
            .filter(|&id| self.store.name(id).starts_with(&dotted))
            .collect()
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let meta = serde_json::json!({
            "options": self.network.options,
            "stage": self.trained_stage,
            "extra": extra,
        });
        Checkpoint::from_store(self.config, meta, &self.store)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let options: ModelOptions = serde_json::from_value(ck.meta["options"].clone())
            .map_err(|e| Error::Checkpoint(format!("model options: {e}")))?;
        let mut model = Self::new(ck.config, options, 0);
        ck.restore_into(&mut model.store)?;
        model.trained_stage = ck.meta["stage"].as_u64().unwrap_or(0) as u8;
        Ok(model)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>, extra: serde_json::Value) -> Result<()> {
        self.to_checkpoint(extra).save(path)
    }

    fn graph(&self) -> Graph<'_, f32> {
        Graph::new(&self.store)
    }

    /// `f` and `y` for an image whose sides are multiples of 16.
    pub fn analysis_transform(&self, x: &ImagePlane) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let mut g = self.graph();
        let xv = g.input(x.to_tensor());
        let (f, y) = self.network.codec.analysis(&mut g, xv)?;
        Ok((g.value(f).clone(), g.value(y).clone()))
    }

    /// Clipped reconstruction from a dequantized latent.
    pub fn synthesis_transform(&self, y_hat: &Tensor<f32>) -> Result<ImagePlane> {
        let mut g = self.graph();
        let yv = g.input(y_hat.clone());
        let x = self.network.codec.synthesis(&mut g, yv)?;
        ImagePlane::from_tensor(g.value(x))
    }

    pub fn hyper_analysis(&self, y_tilde: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = self.graph();
        let yv = g.input(y_tilde.clone());
        let z = self.network.codec.hyper_analysis(&mut g, yv)?;
        Ok(g.value(z).clone())
    }

    /// Gaussian mean and scale for `y` given the dequantized hyper-latent.
    pub fn hyper_synthesis(&self, z_hat: &Tensor<f32>) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let mut g = self.graph();
        let zv = g.input(z_hat.clone());
        let (m, s) = self.network.codec.hyper_synthesis(&mut g, zv)?;
        Ok((g.value(m).clone(), g.value(s).clone()))
    }

    pub fn mask_representation(&self, m: &RoiMask) -> Result<Tensor<f32>> {
        let mut g = self.graph();
        let mv = g.input(m.to_tensor());
        let l = self.network.mr.forward(&mut g, mv)?;
        Ok(g.value(l).clone())
    }

    pub fn importance_generation(&self, f: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = self.graph();
        let fv = g.input(f.clone());
        let i = self.network.ig.forward(&mut g, fv)?;
        Ok(g.value(i).clone())
    }

    /// Padded dimensions and the latent/hyper-latent shapes for an image.
    pub fn geometry(&self, height: usize, width: usize) -> ([usize; 2], [usize; 3], [usize; 3]) {
        let m = self.config.input_multiple;
        let (ph, pw) = (height.div_ceil(m) * m, width.div_ceil(m) * m);
        let y = [self.config.channels_n, ph / LATENT_STRIDE, pw / LATENT_STRIDE];
        let z = [self.config.channels_m, ph / HYPER_STRIDE, pw / HYPER_STRIDE];
        ([ph, pw], y, z)
    }

    /// Encodes `x` with the ROI mask `m`, given at half the padded size (or
    /// half the original size, in which case it is reflect-padded).
    pub fn compress(&self, x: &ImagePlane, m: &RoiMask, provenance: Provenance) -> Result<Compressed> {
        let (h, w) = (x.height(), x.width());
        if h > u16::MAX as usize || w > u16::MAX as usize {
            return Err(Error::InvalidInput(format!("image {h}x{w} exceeds 65535 pixels per side")));
        }
        let ([ph, pw], _, _) = self.geometry(h, w);
        let mask = if (m.height(), m.width()) == (ph / 2, pw / 2) {
            m.clone()
        } else if (m.height(), m.width()) == (h.div_ceil(2), w.div_ceil(2)) {
            m.pad_to(ph / 2, pw / 2)
        } else {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} does not fit image {h}x{w}",
                m.height(),
                m.width()
            )));
        };
        let padded = x.pad_to_multiple(self.config.input_multiple);

        let mut g = self.graph();
        let xv = g.input(padded.to_tensor());
        let mv = g.input(mask.to_tensor());
        let (_, _, y_tilde) = self.network.encode_latent(&mut g, xv, Some(mv))?;
        let z = self.network.codec.hyper_analysis(&mut g, y_tilde)?;
        let y_tilde = g.value(y_tilde).clone();
        let z = g.value(z).clone();
        drop(g);

        let prior = self.network.codec.factorized_prior(&self.store);
        let z_median = prior.median_tensor(z.height(), z.width());
        let z_symbols = quantize(&z, Some(&z_median))?;
        let z_hat = z_symbols.dequantize(Some(&z_median))?;
        let (mean, scale) = self.hyper_synthesis(&z_hat)?;
        let y_symbols = quantize(&y_tilde, Some(&mean))?;

        let z_model = EntropyModel::Factorized(&prior);
        let y_model = EntropyModel::Gaussian { scales: &scale };
        let z_payload = range_encode(&z_symbols, z_model)?;
        let y_payload = range_encode(&y_symbols, y_model)?;
        let estimated_z_bits = estimate_rate(&z_symbols, z_model)?;
        let estimated_y_bits = estimate_rate(&y_symbols, y_model)?;

        let y_hat = y_symbols.dequantize(Some(&mean))?;
        let reconstruction = self.synthesis_transform(&y_hat)?.crop(h, w)?;
        let bitstream = Bitstream {
            config_id: self.config.id,
            lambda_index: self.config.lambda_index,
            height: h as u16,
            width: w as u16,
            provenance,
            z_payload,
            y_payload,
        };
        let bytes = bitstream.to_bytes()?;
        Ok(Compressed {
            bitstream,
            bytes,
            reconstruction,
            z_symbols,
            y_symbols,
            estimated_z_bits,
            estimated_y_bits,
        })
    }

    /// Checks that a container was produced by a model of this configuration.
    pub fn check_compatible(&self, b: &Bitstream) -> Result<()> {
        if b.config_id != self.config.id || b.lambda_index != self.config.lambda_index {
            return Err(Error::ConfigMismatch(format!(
                "stream needs config {:?} / lambda index {}, model is {:?} / {}",
                b.config_id, b.lambda_index, self.config.id, self.config.lambda_index
            )));
        }
        Ok(())
    }

    /// Decodes the two payloads back to symbols.
    pub fn decode_symbols(&self, b: &Bitstream) -> Result<(QuantizedLatent, QuantizedLatent, Tensor<f32>)> {
        self.check_compatible(b)?;
        let (_, y_shape, z_shape) = self.geometry(b.height as usize, b.width as usize);
        let prior = self.network.codec.factorized_prior(&self.store);
        let z_symbols = range_decode(&b.z_payload, EntropyModel::Factorized(&prior), z_shape)?;
        let z_hat = z_symbols.dequantize(Some(&prior.median_tensor(z_shape[1], z_shape[2])))?;
        let (mean, scale) = self.hyper_synthesis(&z_hat)?;
        if mean.shape() != y_shape {
            return Err(Error::ShapeMismatch("hyper-synthesis output does not match latent".into()));
        }
        let y_symbols = range_decode(&b.y_payload, EntropyModel::Gaussian { scales: &scale }, y_shape)?;
        Ok((z_symbols, y_symbols, mean))
    }

    /// Mask-free decoding.
    pub fn decompress(&self, b: &Bitstream) -> Result<ImagePlane> {
        let (_, y_symbols, mean) = self.decode_symbols(b)?;
        let y_hat = y_symbols.dequantize(Some(&mean))?;
        self.synthesis_transform(&y_hat)?.crop(b.height as usize, b.width as usize)
    }

    pub fn decompress_bytes(&self, bytes: &[u8]) -> Result<ImagePlane> {
        self.decompress(&Bitstream::from_bytes(bytes)?)
    }
}

/// Canonical checkpoint file name for a configuration and architecture
/// variant, e.g. `desk_lambda1.crck` or `desk_lambda1_mm_noig.crck`.
pub fn model_file_name(config: &CodecConfig, options: ModelOptions) -> String {
    let mut name = format!("{}_lambda{}", config.id, config.lambda_index);
    match options.fusion {
        Fusion::AddMul => {}
        Fusion::MulMul => name.push_str("_mm"),
        Fusion::AddAdd => name.push_str("_aa"),
    }
    if !options.use_ig {
        name.push_str("_noig");
    }
    if options.mask_prior == MaskPrior::Interpolated {
        name.push_str("_interp");
    }
    name + ".crck"
}
