//! RGB image planes with values in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// An H x W x 3 interleaved RGB image with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// Mirror index without edge repetition (numpy's "reflect"), periodic for
/// pads wider than the image.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

impl ImagePlane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("image dimensions must be positive".into()));
        }
        if data.len() != height * width * 3 {
            return Err(Error::ShapeMismatch(format!(
                "image data has {} samples, expected {}x{}x3",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for h in 0..height {
            for w in 0..width {
                for c in 0..3 {
                    data.push(f(h, w, c).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self::from_fn(height, width, |_, _, _| value)
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

    #[inline]
    pub fn get(&self, h: usize, w: usize, c: usize) -> f32 {
        self.data[(h * self.width + w) * 3 + c]
    }

    pub fn pixel(&self, h: usize, w: usize) -> [f32; 3] {
        let i = (h * self.width + w) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Channel-major copy for the network.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_fn([3, self.height, self.width], |c, h, w| self.get(h, w, c))
    }

    /// Builds an image from a 3-channel tensor, clipping to `[0, 1]`.
    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self> {
        if t.channels() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected a 3-channel tensor, got {:?}",
                t.shape()
            )));
        }
        Ok(Self::from_fn(t.height(), t.width(), |h, w, c| {
            let v = t.get(c, h, w);
            if v.is_nan() {
                0.0
            } else {
                v
            }
        }))
    }

    /// Reflect-pads bottom and right so both dimensions are multiples of
    /// `multiple`.
    pub fn pad_to_multiple(&self, multiple: usize) -> Self {
        let ph = self.height.div_ceil(multiple) * multiple;
        let pw = self.width.div_ceil(multiple) * multiple;
        if ph == self.height && pw == self.width {
            return self.clone();
        }
        Self::from_fn(ph, pw, |h, w, c| {
            self.get(
                reflect_index(h as isize, self.height),
                reflect_index(w as isize, self.width),
                c,
            )
        })
    }

    /// Top-left crop.
    pub fn crop(&self, height: usize, width: usize) -> Result<Self> {
        self.crop_at(0, 0, height, width)
    }

    pub fn crop_at(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::ShapeMismatch(format!(
                "crop {height}x{width}+{top}+{left} exceeds image {}x{}",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(height, width, |h, w, c| self.get(top + h, left + w, c)))
    }

    /// Rounds to 8-bit RGB.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let bytes = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        Self {
            height: img.height() as usize,
            width: img.width() as usize,
            data: img.as_raw().iter().map(|&b| b as f32 / 255.0).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb8().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_padding_mirrors_without_edge_repeat() {
        let img = ImagePlane::from_fn(3, 5, |h, w, _| (h * 5 + w) as f32 / 20.0);
        let padded = img.pad_to_multiple(8);
        assert_eq!((padded.height(), padded.width()), (8, 8));
        // Row 3 mirrors row 1, column 5 mirrors column 3.
        assert_eq!(padded.get(3, 0, 0), img.get(1, 0, 0));
        assert_eq!(padded.get(0, 5, 0), img.get(0, 3, 0));
        assert_eq!(padded.crop(3, 5).unwrap(), img);
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(ImagePlane::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(ImagePlane::new(1, 1, vec![0.0, 0.5]).is_err());
    }
}
