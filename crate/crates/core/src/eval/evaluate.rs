//! Per-image evaluation of a model under given mask settings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::bitstream::Provenance;
use crate::data::AnnotatedRecord;
use crate::error::Result;
use crate::eval::metrics::{non_roi_psnr, psnr, roi_indicator, roi_psnr};
use crate::image::ImagePlane;
use crate::model::RoiCodec;
use crate::tma::backend::{binary_similarity, FOREGROUND};
use crate::tma::{adjustable_binarization, BinarizationConfig, BinaryMask, RoiMask, SimilarityMap};

/// Which pixel set ROI-PSNR is computed over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoiSource {
    /// The annotated mask at full resolution.
    #[default]
    GroundTruth,
    /// Nearest-neighbour upsampling of the binarized mask's ROI.
    Mask,
}

impl std::str::FromStr for RoiSource {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" | "ground-truth" => Ok(Self::GroundTruth),
            "mask" => Ok(Self::Mask),
            other => Err(crate::Error::InvalidInput(format!("unknown ROI source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub eta: f32,
    pub sigma: f32,
    /// Category used as ROI; `None` takes the union of all annotations.
    pub category: Option<String>,
    pub roi_source: RoiSource,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            eta: 0.85,
            sigma: 0.01,
            category: None,
            roi_source: RoiSource::GroundTruth,
        }
    }
}

/// Metrics of one reconstructed image.
#[derive(Clone, Debug)]
pub struct ImageEval {
    pub image_id: String,
    pub bpp: f64,
    pub psnr: f64,
    pub roi_psnr: Option<f64>,
    pub non_roi_psnr: Option<f64>,
    pub reconstruction: ImagePlane,
}

/// The full-resolution ROI annotation selected by `category`.
pub fn annotated_roi(masks: &BTreeMap<String, BinaryMask>, category: Option<&str>, h: usize, w: usize) -> BinaryMask {
    let empty = BinaryMask::filled(h, w, false);
    match category {
        Some(c) => masks.get(&c.trim().to_lowercase()).cloned().unwrap_or(empty),
        None => masks.values().fold(empty, |acc, m| acc.union(m).unwrap_or(acc)),
    }
}

/// Binarized mask for an image from its ground-truth ROI.
pub fn mask_from_annotation(roi: &BinaryMask, eta: f32, sigma: f32) -> Result<RoiMask> {
    let p: SimilarityMap = binary_similarity(roi, roi.height().div_ceil(2), roi.width().div_ceil(2));
    Ok(adjustable_binarization(&p, BinarizationConfig::new(eta, sigma)?))
}

pub fn image_id(record: &AnnotatedRecord) -> String {
    std::path::Path::new(&record.file_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| record.id.to_string())
}

/// Compresses one annotated image and measures the reconstruction.
pub fn evaluate_record(model: &RoiCodec, record: &AnnotatedRecord, settings: &EvalSettings) -> Result<ImageEval> {
    let x = &record.image;
    let (h, w) = (x.height(), x.width());
    let gt = annotated_roi(&record.masks, settings.category.as_deref(), h, w);
    let mask = mask_from_annotation(&gt, settings.eta, settings.sigma)?;
    let provenance = Provenance {
        prompt: match &settings.category {
            Some(c) => c.clone(),
            None if record.masks.is_empty() => FOREGROUND.to_string(),
            None => record.masks.keys().cloned().collect::<Vec<_>>().join(", "),
        },
        sigma: settings.sigma as f64,
        eta: settings.eta as f64,
    };
    let out = model.compress(x, &mask, provenance)?;
    let roi = match settings.roi_source {
        RoiSource::GroundTruth => gt,
        RoiSource::Mask => roi_indicator(&mask, h, w),
    };
    let has_roi = roi.count() > 0;
    let has_rest = roi.count() < h * w;
    Ok(ImageEval {
        image_id: image_id(record),
        bpp: out.bpp(),
        psnr: psnr(x, &out.reconstruction)?,
        roi_psnr: has_roi.then(|| roi_psnr(x, &out.reconstruction, &roi)).transpose()?,
        non_roi_psnr: has_rest.then(|| non_roi_psnr(x, &out.reconstruction, &roi)).transpose()?,
        reconstruction: out.reconstruction,
    })
}
