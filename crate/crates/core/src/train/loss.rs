//! Rate-distortion loss terms evaluated outside the autodiff graph.

use serde::{Deserialize, Serialize};

use crate::codec::config::lambda_for_index;
use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::model::DISTORTION_SCALE;
use crate::tma::{upsample_mask, RoiMask};

/// Mean of `((x - x_hat) * U(m))^2` over all `3 * H * W` elements.
pub fn weighted_distortion(x: &ImagePlane, x_hat: &ImagePlane, m: &RoiMask) -> Result<f64> {
    if (x.height(), x.width()) != (x_hat.height(), x_hat.width()) {
        return Err(Error::ShapeMismatch(format!(
            "x is {}x{}, x_hat is {}x{}",
            x.height(),
            x.width(),
            x_hat.height(),
            x_hat.width()
        )));
    }
    let (h, w) = (x.height(), x.width());
    let weights = upsample_mask(m, h, w)?;
    let mut sum = 0.0f64;
    for c in 0..3 {
        for i in 0..h {
            for j in 0..w {
                let r = (x.get(i, j, c) as f64 - x_hat.get(i, j, c) as f64) * weights.get(c, i, j) as f64;
                sum += r * r;
            }
        }
    }
    Ok(sum / (3 * h * w) as f64)
}

/// One evaluated objective `L = lambda * 255^2 * D + R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub distortion: f64,
    pub rate_bpp: f64,
    pub lambda: f64,
    pub total: f64,
}

pub fn rd_loss(distortion: f64, rate_bpp: f64, lambda_index: usize) -> Result<LossBreakdown> {
    let lambda = lambda_for_index(lambda_index)?;
    if !distortion.is_finite() || !rate_bpp.is_finite() {
        return Err(Error::NonFinite(format!("D = {distortion}, R = {rate_bpp}")));
    }
    if distortion < 0.0 || rate_bpp < 0.0 {
        return Err(Error::InvalidInput(format!(
            "D and R must be non-negative (D = {distortion}, R = {rate_bpp})"
        )));
    }
    Ok(LossBreakdown {
        distortion,
        rate_bpp,
        lambda,
        total: lambda * DISTORTION_SCALE * distortion + rate_bpp,
    })
}
