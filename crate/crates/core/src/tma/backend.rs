//! Similarity providers: a file-loaded vision-language model, ground-truth
//! injection, and rule-based synthetic maps.

use std::collections::HashMap;
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::tma::maps::{BinaryMask, SimilarityMap};

pub const FOREGROUND: &str = "Foreground";
pub const BACKGROUND: &str = "Background";

/// A trimmed, non-empty prompt.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextPrompt(String);

impl TextPrompt {
    pub fn new(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.is_empty() {
            return Err(Error::InvalidInput("prompt is empty".into()));
        }
        Ok(Self(t.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_foreground(&self) -> bool {
        self.0.eq_ignore_ascii_case(FOREGROUND)
    }

    pub fn is_background(&self) -> bool {
        self.0.eq_ignore_ascii_case(BACKGROUND)
    }

    /// Lower-case alphanumeric tokens.
    pub fn tokens(&self) -> Vec<String> {
        self.0
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }
}

impl Default for TextPrompt {
    fn default() -> Self {
        Self(FOREGROUND.into())
    }
}

impl std::fmt::Display for TextPrompt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Pretrained,
    GroundTruth,
    Synthetic,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrained" => Ok(Self::Pretrained),
            "ground-truth" | "gt" => Ok(Self::GroundTruth),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(Error::InvalidInput(format!("unknown backend {other:?}"))),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pretrained => "pretrained",
            Self::GroundTruth => "ground-truth",
            Self::Synthetic => "synthetic",
        })
    }
}

/// Produces a `ceil(H/2) x ceil(W/2)` map in `[0, 1]` for any image.
pub trait SimilarityBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn similarity(&self, image: &ImagePlane, prompt: &TextPrompt) -> Result<SimilarityMap>;
}

pub fn map_dims(image: &ImagePlane) -> (usize, usize) {
    (image.height().div_ceil(2), image.width().div_ceil(2))
}

/// Pixel-wise maximum of the maps for several prompts.
pub fn similarity_multi(
    backend: &dyn SimilarityBackend,
    image: &ImagePlane,
    prompts: &[TextPrompt],
) -> Result<SimilarityMap> {
    let (first, rest) = prompts
        .split_first()
        .ok_or_else(|| Error::InvalidInput("no prompts given".into()))?;
    let mut acc = backend.similarity(image, first)?;
    for p in rest {
        acc = acc.max(&backend.similarity(image, p)?)?;
    }
    Ok(acc)
}

/// Mean over the 2x2 block (clipped at the border) of a per-pixel score.
fn pooled(image: &ImagePlane, score: impl Fn([f32; 3]) -> f32) -> SimilarityMap {
    let (h2, w2) = map_dims(image);
    SimilarityMap::from_fn(h2, w2, |i, j| {
        let mut acc = 0.0;
        let mut n = 0.0;
        for h in 2 * i..(2 * i + 2).min(image.height()) {
            for w in 2 * j..(2 * j + 2).min(image.width()) {
                acc += score(image.pixel(h, w));
                n += 1.0;
            }
        }
        acc / n
    })
}

pub fn luminance([r, g, b]: [f32; 3]) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Hue in degrees and HSV saturation.
pub fn hue_saturation([r, g, b]: [f32; 3]) -> (f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, sat);
    }
    let h = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h, sat)
}

pub const COLOR_HUES: [(&str, f32); 6] = [
    ("red", 0.0),
    ("yellow", 60.0),
    ("green", 120.0),
    ("cyan", 180.0),
    ("blue", 240.0),
    ("magenta", 300.0),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticRule {
    /// `p` is the pixel luminance.
    Brightness,
    /// `p` peaks on saturated pixels whose hue matches a colour word in the
    /// prompt; prompts without one fall back to brightness.
    HueBand { half_width_deg: f32 },
}

/// Deterministic rule-based maps for tests and weight-free demos.
#[derive(Clone, Debug)]
pub struct SyntheticBackend {
    pub rule: SyntheticRule,
}

impl SyntheticBackend {
    pub fn brightness() -> Self {
        Self { rule: SyntheticRule::Brightness }
    }

    pub fn hue_band() -> Self {
        Self { rule: SyntheticRule::HueBand { half_width_deg: 40.0 } }
    }
}

impl SimilarityBackend for SyntheticBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Synthetic
    }

    fn similarity(&self, image: &ImagePlane, prompt: &TextPrompt) -> Result<SimilarityMap> {
        let (h2, w2) = map_dims(image);
        if prompt.is_foreground() {
            return Ok(SimilarityMap::constant(h2, w2, 1.0));
        }
        if prompt.is_background() {
            return Ok(SimilarityMap::constant(h2, w2, 0.0));
        }
        match self.rule {
            SyntheticRule::Brightness => Ok(pooled(image, luminance)),
            SyntheticRule::HueBand { half_width_deg } => {
                let tokens = prompt.tokens();
                let Some(&(_, target)) = COLOR_HUES.iter().find(|(name, _)| tokens.iter().any(|t| t == name)) else {
                    return Ok(pooled(image, luminance));
                };
                Ok(pooled(image, |px| {
                    let (hue, sat) = hue_saturation(px);
                    let d = (hue - target).abs();
                    let d = d.min(360.0 - d);
                    let closeness = (1.0 - d / half_width_deg).max(0.0);
                    closeness * ((sat - 0.2) / 0.3).clamp(0.0, 1.0)
                }))
            }
        }
    }
}

/// Key identifying an image by content.
pub fn image_key(image: &ImagePlane) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((image.height() as u64).to_le_bytes());
    h.update((image.width() as u64).to_le_bytes());
    for v in image.data() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

/// Replaces the model's similarity with a registered segmentation, resampled
/// by nearest neighbour so it stays binary.
#[derive(Debug, Default)]
pub struct GroundTruthBackend {
    masks: RwLock<HashMap<([u8; 32], String), BinaryMask>>,
}

impl GroundTruthBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers (or unions into) the mask of `category` for `image`.
    pub fn register(&self, image: &ImagePlane, category: &str, mask: BinaryMask) -> Result<()> {
        let key = (image_key(image), category.trim().to_lowercase());
        let mut masks = self.masks.write().expect("mask registry poisoned");
        let merged = match masks.get(&key) {
            Some(existing) => existing.union(&mask)?,
            None => mask,
        };
        masks.insert(key, merged);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.masks.read().expect("mask registry poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A binary mask as a similarity map of `height x width`.
pub fn binary_similarity(mask: &BinaryMask, height: usize, width: usize) -> SimilarityMap {
    let r = mask.resize_nearest(height, width);
    SimilarityMap::from_fn(height, width, |h, w| if r.get(h, w) { 1.0 } else { 0.0 })
}

impl SimilarityBackend for GroundTruthBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::GroundTruth
    }

    fn similarity(&self, image: &ImagePlane, prompt: &TextPrompt) -> Result<SimilarityMap> {
        let (h2, w2) = map_dims(image);
        if prompt.is_foreground() {
            return Ok(SimilarityMap::constant(h2, w2, 1.0));
        }
        if prompt.is_background() {
            return Ok(SimilarityMap::constant(h2, w2, 0.0));
        }
        let key = (image_key(image), prompt.as_str().to_lowercase());
        let masks = self.masks.read().expect("mask registry poisoned");
        let mask = masks
            .get(&key)
            .ok_or_else(|| Error::MissingGroundTruth(prompt.to_string()))?;
        Ok(binary_similarity(mask, h2, w2))
    }
}

/// Weights of a compact pixel/text embedding model.
///
/// Each pixel is described by `[r, g, b, luma, saturation, cos hue, sin hue, 1]`,
/// projected to `dim` by `projection` (`dim x 8`, row-major). Prompt
/// embeddings average the vectors of known tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub dim: usize,
    pub projection: Vec<f32>,
    pub vocabulary: HashMap<String, Vec<f32>>,
}

pub const PIXEL_FEATURES: usize = 8;

fn pixel_features(px: [f32; 3]) -> [f32; PIXEL_FEATURES] {
    let (hue, sat) = hue_saturation(px);
    let rad = hue.to_radians();
    [px[0], px[1], px[2], luminance(px), sat, sat * rad.cos(), sat * rad.sin(), 1.0]
}

impl EmbeddingModel {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.projection.len() != self.dim * PIXEL_FEATURES {
            return Err(Error::BackendUnavailable(format!(
                "projection has {} weights, expected {} x {PIXEL_FEATURES}",
                self.projection.len(),
                self.dim
            )));
        }
        if let Some((w, _)) = self.vocabulary.iter().find(|(_, v)| v.len() != self.dim) {
            return Err(Error::BackendUnavailable(format!("embedding for {w:?} has the wrong size")));
        }
        Ok(())
    }
}

/// Cosine similarity between projected pixels and the prompt embedding,
/// mapped to `[0, 1]` by `(cos + 1) / 2`.
#[derive(Clone, Debug)]
pub struct PretrainedBackend {
    model: EmbeddingModel,
}

impl PretrainedBackend {
    pub fn from_model(model: EmbeddingModel) -> Result<Self> {
        model.validate()?;
        Ok(Self { model })
    }

    /// Any failure to read or parse the weights is `BackendUnavailable`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", path.display())))?;
        let model: EmbeddingModel = serde_json::from_slice(&bytes)
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", path.display())))?;
        Self::from_model(model)
    }

    fn text_embedding(&self, prompt: &TextPrompt) -> Result<Vec<f32>> {
        let mut acc = vec![0.0; self.model.dim];
        let mut n = 0;
        for t in prompt.tokens() {
            if let Some(v) = self.model.vocabulary.get(&t) {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::InvalidInput(format!("no known words in prompt {prompt:?}")));
        }
        Ok(acc)
    }
}

impl SimilarityBackend for PretrainedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Pretrained
    }

    fn similarity(&self, image: &ImagePlane, prompt: &TextPrompt) -> Result<SimilarityMap> {
        let (h2, w2) = map_dims(image);
        if prompt.is_foreground() {
            return Ok(SimilarityMap::constant(h2, w2, 1.0));
        }
        let text = self.text_embedding(prompt)?;
        let tnorm = text.iter().map(|v| v * v).sum::<f32>().sqrt();
        let dim = self.model.dim;
        let proj = &self.model.projection;
        Ok(pooled(image, |px| {
            let feats = pixel_features(px);
            let mut dot = 0.0;
            let mut norm = 0.0;
            for (d, t) in text.iter().enumerate().take(dim) {
                let row = &proj[d * PIXEL_FEATURES..(d + 1) * PIXEL_FEATURES];
                let e: f32 = row.iter().zip(&feats).map(|(a, b)| a * b).sum();
                dot += e * t;
                norm += e * e;
            }
            let denom = norm.sqrt() * tnorm;
            if denom <= f32::EPSILON {
                0.5
            } else {
                ((dot / denom).clamp(-1.0, 1.0) + 1.0) / 2.0
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_black_white() -> ImagePlane {
        ImagePlane::from_fn(8, 8, |_, w, _| if w < 4 { 0.0 } else { 1.0 })
    }

    #[test]
    fn brightness_rule() {
        let p = SyntheticBackend::brightness()
            .similarity(&half_black_white(), &TextPrompt::new("anything").unwrap())
            .unwrap();
        assert_eq!((p.height(), p.width()), (4, 4));
        for h in 0..4 {
            for w in 0..4 {
                assert!((p.get(h, w) - if w < 2 { 0.0 } else { 1.0 }).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn special_prompts() {
        let img = half_black_white();
        let b = SyntheticBackend::hue_band();
        let fg = b.similarity(&img, &TextPrompt::default()).unwrap();
        assert!(fg.data().iter().all(|&v| v == 1.0));
        let bg = b.similarity(&img, &TextPrompt::new(" background ").unwrap()).unwrap();
        assert!(bg.data().iter().all(|&v| v == 0.0));
        assert!(TextPrompt::new("   ").is_err());
    }

    #[test]
    fn hue_band_picks_the_named_colour() {
        let img = ImagePlane::from_fn(4, 4, |h, _, c| match (h < 2, c) {
            (true, 0) => 0.9,
            (true, _) => 0.1,
            (false, 2) => 0.9,
            (false, _) => 0.1,
        });
        let p = SyntheticBackend::hue_band().similarity(&img, &TextPrompt::new("red disc").unwrap()).unwrap();
        assert_eq!(p.data(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn ground_truth_injection() {
        let img = half_black_white();
        let backend = GroundTruthBackend::new();
        let gt = BinaryMask::from_fn(8, 8, |h, _| h < 4);
        let prompt = TextPrompt::new("Person").unwrap();
        assert!(matches!(backend.similarity(&img, &prompt), Err(Error::MissingGroundTruth(_))));
        backend.register(&img, "person", gt.clone()).unwrap();
        let p = backend.similarity(&img, &prompt).unwrap();
        assert_eq!(p, binary_similarity(&gt, 4, 4));
        assert_eq!(p.data().iter().filter(|&&v| v == 1.0).count(), 8);
    }

    #[test]
    fn pretrained_missing_file_is_unavailable() {
        let e = PretrainedBackend::load("/nonexistent/model.json").unwrap_err();
        assert!(matches!(e, Error::BackendUnavailable(_)));
    }

    #[test]
    fn pretrained_is_deterministic_and_bounded() {
        let mut projection = vec![0.0; 2 * PIXEL_FEATURES];
        projection[5] = 1.0;
        projection[PIXEL_FEATURES + 6] = 1.0;
        let vocabulary = HashMap::from([("red".to_string(), vec![1.0, 0.0]), ("green".to_string(), vec![-0.5, 0.87])]);
        let backend = PretrainedBackend::from_model(EmbeddingModel { dim: 2, projection, vocabulary }).unwrap();
        let img = ImagePlane::from_fn(6, 6, |h, w, c| ((h * 7 + w * 3 + c * 5) % 11) as f32 / 10.0);
        let prompt = TextPrompt::new("red").unwrap();
        let a = backend.similarity(&img, &prompt).unwrap();
        assert_eq!(a, backend.similarity(&img, &prompt).unwrap());
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(backend.similarity(&img, &TextPrompt::new("zebra").unwrap()).is_err());
    }

    #[test]
    fn multi_prompt_is_pixelwise_max() {
        let img = ImagePlane::from_fn(4, 4, |h, _, c| if (h < 2) == (c == 0) { 0.9 } else { 0.1 });
        let b = SyntheticBackend::hue_band();
        let prompts = [TextPrompt::new("red").unwrap(), TextPrompt::new("cyan").unwrap()];
        let m = similarity_multi(&b, &img, &prompts).unwrap();
        assert!(m.data().iter().all(|&v| v > 0.9));
    }
}
