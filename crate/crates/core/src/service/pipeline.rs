//! The mask and compression path shared by the CLI and the HTTP service, so
//! both produce byte-identical containers for identical inputs.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::codec::bitstream::{Bitstream, Provenance};
use crate::error::{Error, Result};
use crate::eval::metrics::{psnr, roi_indicator, roi_psnr};
use crate::image::ImagePlane;
use crate::model::RoiCodec;
use crate::tma::{
    adjustable_binarization, BackendKind, BinarizationConfig, GroundTruthBackend, PretrainedBackend, RoiMask,
    SimilarityBackend, SimilarityMap, SyntheticBackend, TextPrompt,
};

/// Similarity backends available to a session. The pretrained backend is
/// loaded on first use.
pub struct Backends {
    synthetic: Arc<SyntheticBackend>,
    ground_truth: Arc<GroundTruthBackend>,
    pretrained_path: Option<PathBuf>,
    pretrained: OnceLock<std::result::Result<Arc<PretrainedBackend>, String>>,
}

impl Default for Backends {
    fn default() -> Self {
        Self::new(None)
    }
}

impl Backends {
    pub fn new(pretrained_path: Option<PathBuf>) -> Self {
        Self {
            synthetic: Arc::new(SyntheticBackend::hue_band()),
            ground_truth: Arc::new(GroundTruthBackend::new()),
            pretrained_path,
            pretrained: OnceLock::new(),
        }
    }

    /// Uses an already constructed pretrained backend.
    pub fn with_pretrained(backend: PretrainedBackend) -> Self {
        let b = Self::new(None);
        let _ = b.pretrained.set(Ok(Arc::new(backend)));
        b
    }

    pub fn ground_truth(&self) -> &GroundTruthBackend {
        &self.ground_truth
    }

    pub fn get(&self, kind: BackendKind) -> Result<Arc<dyn SimilarityBackend>> {
        match kind {
            BackendKind::Synthetic => Ok(self.synthetic.clone()),
            BackendKind::GroundTruth => Ok(self.ground_truth.clone()),
            BackendKind::Pretrained => {
                let loaded = self.pretrained.get_or_init(|| match &self.pretrained_path {
                    None => Err("no embedding weights configured".into()),
                    Some(p) => PretrainedBackend::load(p).map(Arc::new).map_err(|e| e.to_string()),
                });
                match loaded {
                    Ok(b) => Ok(b.clone()),
                    Err(msg) => Err(Error::BackendUnavailable(format!(
                        "pretrained: {msg}; fallback backends: synthetic, ground-truth"
                    ))),
                }
            }
        }
    }
}

/// Inputs of the mask stage.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskRequest {
    pub text: String,
    pub eta: f32,
    pub sigma: f32,
    pub backend: BackendKind,
}

impl Default for MaskRequest {
    fn default() -> Self {
        Self {
            text: TextPrompt::default().to_string(),
            eta: 0.85,
            sigma: 0.01,
            backend: BackendKind::Synthetic,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaskResult {
    pub similarity: SimilarityMap,
    pub mask: RoiMask,
}

impl MaskResult {
    pub fn roi_pixel_fraction(&self) -> f64 {
        self.mask.roi_fraction()
    }
}

pub fn similarity(backends: &Backends, image: &ImagePlane, text: &str, kind: BackendKind) -> Result<SimilarityMap> {
    backends.get(kind)?.similarity(image, &TextPrompt::new(text)?)
}

pub fn make_mask(backends: &Backends, image: &ImagePlane, req: &MaskRequest) -> Result<MaskResult> {
    let cfg = BinarizationConfig::new(req.eta, req.sigma)?;
    let similarity = similarity(backends, image, &req.text, req.backend)?;
    let mask = adjustable_binarization(&similarity, cfg);
    Ok(MaskResult { similarity, mask })
}

/// Quality figures reported next to a container.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressionMetrics {
    pub bpp: f64,
    pub psnr: f64,
    /// `None` when the mask has no ROI pixels.
    pub roi_psnr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CompressResult {
    pub mask: MaskResult,
    pub bytes: Vec<u8>,
    pub reconstruction: ImagePlane,
    pub metrics: CompressionMetrics,
}

pub fn compress(backends: &Backends, model: &RoiCodec, image: &ImagePlane, req: &MaskRequest) -> Result<CompressResult> {
    let mask = make_mask(backends, image, req)?;
    let provenance = Provenance {
        prompt: req.text.clone(),
        sigma: req.sigma as f64,
        eta: req.eta as f64,
    };
    let out = model.compress(image, &mask.mask, provenance)?;
    let roi = roi_indicator(&mask.mask, image.height(), image.width());
    let metrics = CompressionMetrics {
        bpp: out.bpp(),
        psnr: psnr(image, &out.reconstruction)?,
        roi_psnr: (roi.count() > 0).then(|| roi_psnr(image, &out.reconstruction, &roi)).transpose()?,
    };
    Ok(CompressResult {
        mask,
        bytes: out.bytes,
        reconstruction: out.reconstruction,
        metrics,
    })
}

/// Parses a container and decodes it with `model`.
pub fn decompress(model: &RoiCodec, bytes: &[u8]) -> Result<(Bitstream, ImagePlane)> {
    let b = Bitstream::from_bytes(bytes)?;
    let image = model.decompress(&b)?;
    Ok((b, image))
}
