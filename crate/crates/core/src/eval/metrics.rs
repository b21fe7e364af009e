//! Image quality and rate metrics.

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::tma::{BinaryMask, RoiMask};

pub use crate::codec::bitstream::bpp;

fn same_dims(x: &ImagePlane, y: &ImagePlane) -> Result<()> {
    if (x.height(), x.width()) != (y.height(), y.width()) {
        return Err(Error::ShapeMismatch(format!(
            "images differ: {}x{} vs {}x{}",
            x.height(),
            x.width(),
            y.height(),
            y.width()
        )));
    }
    Ok(())
}

fn to_db(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn mse(x: &ImagePlane, y: &ImagePlane) -> Result<f64> {
    same_dims(x, y)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / x.data().len() as f64)
}

/// `10 log10(1 / MSE)` on `[0, 1]` pixels; identical images give `+inf`.
pub fn psnr(x: &ImagePlane, y: &ImagePlane) -> Result<f64> {
    Ok(to_db(mse(x, y)?))
}

/// PSNR over the pixels where `roi` is set (all three channels).
pub fn roi_psnr(x: &ImagePlane, y: &ImagePlane, roi: &BinaryMask) -> Result<f64> {
    same_dims(x, y)?;
    if (roi.height(), roi.width()) != (x.height(), x.width()) {
        return Err(Error::ShapeMismatch(format!(
            "ROI {}x{} vs image {}x{}",
            roi.height(),
            roi.width(),
            x.height(),
            x.width()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, &inside) in roi.data().iter().enumerate() {
        if inside {
            for c in 0..3 {
                let d = x.data()[3 * p + c] as f64 - y.data()[3 * p + c] as f64;
                sum += d * d;
            }
            n += 3;
        }
    }
    if n == 0 {
        return Err(Error::EmptyRoi);
    }
    Ok(to_db(sum / n as f64))
}

/// PSNR over the complement of `roi`.
pub fn non_roi_psnr(x: &ImagePlane, y: &ImagePlane, roi: &BinaryMask) -> Result<f64> {
    let inverse = BinaryMask::from_fn(roi.height(), roi.width(), |h, w| !roi.get(h, w));
    roi_psnr(x, y, &inverse)
}

/// Full-resolution ROI indicator of a mask: nearest-neighbour upsampling of
/// `m == 1`.
pub fn roi_indicator(m: &RoiMask, height: usize, width: usize) -> BinaryMask {
    BinaryMask::from_roi(m).resize_nearest(height, width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let x = ImagePlane::filled(4, 4, 0.5);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        let y = ImagePlane::filled(4, 4, 0.6);
        assert!((psnr(&x, &y).unwrap() - 20.0).abs() < 1e-5);
        assert!(psnr(&x, &ImagePlane::filled(4, 5, 0.5)).is_err());
    }

    #[test]
    fn roi_cases() {
        let x = ImagePlane::filled(4, 4, 0.5);
        let y = ImagePlane::from_fn(4, 4, |h, _, _| if h < 2 { 0.5 } else { 0.7 });
        let top = BinaryMask::from_fn(4, 4, |h, _| h < 2);
        assert_eq!(roi_psnr(&x, &y, &top).unwrap(), f64::INFINITY);
        assert!(non_roi_psnr(&x, &y, &top).unwrap().is_finite());
        let all = BinaryMask::filled(4, 4, true);
        assert_eq!(roi_psnr(&x, &y, &all).unwrap(), psnr(&x, &y).unwrap());
        assert!(matches!(roi_psnr(&x, &y, &BinaryMask::filled(4, 4, false)), Err(Error::EmptyRoi)));
    }
}
