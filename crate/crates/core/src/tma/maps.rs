//! Similarity maps, ROI masks and their resampling.

use crate::error::{Error, Result};
use crate::image::reflect_index;
use crate::nn::Tensor;

/// Per-pixel text similarity in `[0, 1]` at half the image resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl SimilarityMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {height}x{width} similarity map",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("similarity {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for h in 0..height {
            for w in 0..width {
                let v = f(h, w);
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self { height, width, data }
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Self::from_fn(height, width, |_, _| value)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, h: usize, w: usize) -> f32 {
        self.data[h * self.width + w]
    }

    /// Pixel-wise maximum, for multi-prompt ROIs.
    pub fn max(&self, other: &Self) -> Result<Self> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::ShapeMismatch("similarity maps differ in size".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.max(*b)).collect();
        Ok(Self { data, ..*self })
    }

    /// Reflect-extends bottom and right to `height x width`.
    pub fn pad_to(&self, height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |h, w| {
            self.get(reflect_index(h as isize, self.height), reflect_index(w as isize, self.width))
        })
    }
}

/// Threshold `eta` and non-ROI value `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BinarizationConfig {
    pub eta: f32,
    pub sigma: f32,
}

impl Default for BinarizationConfig {
    fn default() -> Self {
        Self { eta: 0.85, sigma: 0.01 }
    }
}

impl BinarizationConfig {
    pub fn new(eta: f32, sigma: f32) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta = {eta} must lie in (0, 1)")));
        }
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::InvalidInput(format!("sigma = {sigma} must lie in [0, 1]")));
        }
        Ok(Self { eta, sigma })
    }
}

/// Two-valued mask: 1 on the ROI, `sigma` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiMask {
    height: usize,
    width: usize,
    sigma: f32,
    roi: Vec<bool>,
}

impl RoiMask {
    pub fn from_indicator(height: usize, width: usize, roi: Vec<bool>, sigma: f32) -> Result<Self> {
        if roi.len() != height * width || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} flags for a {height}x{width} mask",
                roi.len()
            )));
        }
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::InvalidInput(format!("sigma = {sigma} must lie in [0, 1]")));
        }
        Ok(Self { height, width, sigma, roi })
    }

    /// `m = 1` everywhere.
    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, sigma: 1.0, roi: vec![true; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn sigma(&self) -> f32 {
        self.sigma
    }

    pub fn get(&self, h: usize, w: usize) -> f32 {
        if self.roi[h * self.width + w] {
            1.0
        } else {
            self.sigma
        }
    }

    pub fn values(&self) -> Vec<f32> {
        self.roi.iter().map(|&r| if r { 1.0 } else { self.sigma }).collect()
    }

    /// Pixels with `m == 1`. With `sigma == 1` every pixel qualifies.
    pub fn roi(&self) -> Vec<bool> {
        if self.sigma == 1.0 {
            vec![true; self.roi.len()]
        } else {
            self.roi.clone()
        }
    }

    pub fn roi_fraction(&self) -> f64 {
        self.roi().iter().filter(|&&r| r).count() as f64 / self.roi.len() as f64
    }

    /// Same ROI geometry with a different non-ROI value.
    pub fn with_sigma(&self, sigma: f32) -> Result<Self> {
        Self::from_indicator(self.height, self.width, self.roi.clone(), sigma)
    }

    /// `1 x H x W` tensor of mask values.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec([1, self.height, self.width], self.values())
    }

    pub fn pad_to(&self, height: usize, width: usize) -> Self {
        let mut roi = Vec::with_capacity(height * width);
        for h in 0..height {
            for w in 0..width {
                let sh = reflect_index(h as isize, self.height);
                let sw = reflect_index(w as isize, self.width);
                roi.push(self.roi[sh * self.width + sw]);
            }
        }
        Self { height, width, sigma: self.sigma, roi }
    }

    pub fn crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width {
            return Err(Error::ShapeMismatch("crop larger than mask".into()));
        }
        let roi = (0..height)
            .flat_map(|h| self.roi[h * self.width..h * self.width + width].iter().copied())
            .collect();
        Ok(Self { height, width, sigma: self.sigma, roi })
    }
}

/// `m = 1` where `eta < p <= 1`, `sigma` otherwise.
pub fn adjustable_binarization(p: &SimilarityMap, cfg: BinarizationConfig) -> RoiMask {
    RoiMask {
        height: p.height,
        width: p.width,
        sigma: cfg.sigma,
        roi: p.data.iter().map(|&v| v > cfg.eta && v <= 1.0).collect(),
    }
}

/// A binary segmentation (ground truth or ROI indicator).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} flags for a {height}x{width} mask",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, h: usize, w: usize) -> bool {
        self.data[h * self.width + w]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::ShapeMismatch("masks differ in size".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect();
        Ok(Self { data, ..*self })
    }

    /// Nearest-neighbour resample: destination pixel `i` reads source pixel
    /// `floor((i + 0.5) * src / dst)`.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        let rows: Vec<usize> = (0..height).map(|i| nearest_source(i, self.height, height)).collect();
        let cols: Vec<usize> = (0..width).map(|j| nearest_source(j, self.width, width)).collect();
        Self::from_fn(height, width, |h, w| self.get(rows[h], cols[w]))
    }

    pub fn from_roi(mask: &RoiMask) -> Self {
        Self { height: mask.height, width: mask.width, data: mask.roi() }
    }

    pub fn crop_at(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::ShapeMismatch("crop outside mask".into()));
        }
        Ok(Self::from_fn(height, width, |h, w| self.get(top + h, left + w)))
    }
}

pub(crate) fn nearest_source(i: usize, src: usize, dst: usize) -> usize {
    (((2 * i + 1) * src) / (2 * dst)).min(src - 1)
}

/// Bilinear resize of a single plane with half-pixel centres
/// (`align_corners = false`), edge-clamped.
pub fn resize_bilinear(src: &[f32], height: usize, width: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let rows = axis(out_h, height);
    let cols = axis(out_w, width);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = src[r0 * width + c0] * (1.0 - fc) + src[r0 * width + c1] * fc;
            let bottom = src[r1 * width + c0] * (1.0 - fc) + src[r1 * width + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// Distortion weights `U(m)`: the mask bilinearly upsampled to
/// `height x width` and repeated over three channels.
pub fn upsample_mask(m: &RoiMask, height: usize, width: usize) -> Result<Tensor<f32>> {
    if height != 2 * m.height || width != 2 * m.width {
        return Err(Error::ShapeMismatch(format!(
            "mask {}x{} cannot weight a {height}x{width} image",
            m.height, m.width
        )));
    }
    let plane = resize_bilinear(&m.values(), m.height, m.width, height, width);
    let mut data = Vec::with_capacity(3 * plane.len());
    for _ in 0..3 {
        data.extend_from_slice(&plane);
    }
    Ok(Tensor::from_vec([3, height, width], data))
}

/// `|ROI & GT| / |ROI | GT|` on the mask grid; `gt` is resampled to the
/// mask's size by nearest neighbour. Two empty sets give 1.
pub fn mask_iou(m: &RoiMask, gt: &BinaryMask) -> f64 {
    let gt = gt.resize_nearest(m.height, m.width);
    iou(&m.roi(), &gt.data)
}

/// IoU at the ground-truth resolution: the ROI indicator is upsampled by
/// nearest neighbour instead.
pub fn mask_iou_full_resolution(m: &RoiMask, gt: &BinaryMask) -> f64 {
    let roi = BinaryMask::from_roi(m).resize_nearest(gt.height, gt.width);
    iou(&roi.data, &gt.data)
}

fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarization_example() {
        let p = SimilarityMap::new(2, 2, vec![0.9, 0.2, 0.85, 0.86]).unwrap();
        let m = adjustable_binarization(&p, BinarizationConfig::new(0.85, 0.1).unwrap());
        assert_eq!(m.values(), vec![1.0, 0.1, 0.1, 1.0]);
    }

    #[test]
    fn sigma_one_collapses_to_ones() {
        let p = SimilarityMap::from_fn(4, 4, |h, w| (h * 4 + w) as f32 / 15.0);
        let m = adjustable_binarization(&p, BinarizationConfig::new(0.5, 1.0).unwrap());
        assert!(m.values().iter().all(|&v| v == 1.0));
        assert_eq!(m.roi_fraction(), 1.0);
    }

    #[test]
    fn config_bounds() {
        assert!(BinarizationConfig::new(0.0, 0.1).is_err());
        assert!(BinarizationConfig::new(1.0, 0.1).is_err());
        assert!(BinarizationConfig::new(0.5, 1.1).is_err());
        assert!(BinarizationConfig::new(0.5, 0.0).is_ok());
    }

    #[test]
    fn checkerboard_upsample_matches_hand_values() {
        let m = RoiMask::from_indicator(2, 2, vec![true, false, false, true], 0.0).unwrap();
        let u = upsample_mask(&m, 4, 4).unwrap();
        // Half-pixel centres: weights 1, 3/4, 1/4, 0 along each axis.
        let expect = [
            [1.0, 0.75, 0.25, 0.0],
            [0.75, 0.625, 0.375, 0.25],
            [0.25, 0.375, 0.625, 0.75],
            [0.0, 0.25, 0.75, 1.0],
        ];
        for c in 0..3 {
            for h in 0..4 {
                for w in 0..4 {
                    assert!((u.get(c, h, w) - expect[h][w]).abs() < 1e-7, "({c},{h},{w})");
                }
            }
        }
    }

    #[test]
    fn upsample_preserves_constants() {
        for sigma in [0.3f32, 1.0] {
            let m = RoiMask::from_indicator(3, 5, vec![false; 15], sigma).unwrap();
            let u = upsample_mask(&m, 6, 10).unwrap();
            assert!(u.data().iter().all(|&v| (v - sigma).abs() < 1e-7));
        }
        let m = RoiMask::full(3, 5);
        assert!(upsample_mask(&m, 6, 10).unwrap().data().iter().all(|&v| v == 1.0));
        assert!(upsample_mask(&m, 6, 11).is_err());
    }

    #[test]
    fn iou_cases() {
        let a = BinaryMask::from_fn(4, 4, |h, _| h < 2);
        let m = RoiMask::from_indicator(4, 4, a.data().to_vec(), 0.1).unwrap();
        assert_eq!(mask_iou(&m, &a), 1.0);
        let disjoint = BinaryMask::from_fn(4, 4, |h, _| h >= 2);
        assert_eq!(mask_iou(&m, &disjoint), 0.0);
        let gt = BinaryMask::from_fn(4, 4, |h, _| h < 4);
        assert_eq!(mask_iou(&m, &gt), 0.5);
        let empty = RoiMask::from_indicator(4, 4, vec![false; 16], 0.1).unwrap();
        assert_eq!(mask_iou(&empty, &BinaryMask::filled(8, 8, false)), 1.0);
    }

    #[test]
    fn iou_resamples_ground_truth() {
        let gt = BinaryMask::from_fn(8, 8, |_, w| w < 4);
        let m = RoiMask::from_indicator(4, 4, BinaryMask::from_fn(4, 4, |_, w| w < 2).data().to_vec(), 0.2).unwrap();
        assert_eq!(mask_iou(&m, &gt), 1.0);
        assert_eq!(mask_iou_full_resolution(&m, &gt), 1.0);
    }

    #[test]
    fn nearest_resize_keeps_binary_blocks() {
        let m = BinaryMask::from_fn(2, 2, |h, w| h == w);
        let big = m.resize_nearest(4, 4);
        assert!(big.get(0, 0) && big.get(1, 1) && !big.get(0, 2) && big.get(3, 3));
    }
}
