//! Mask and similarity-map files: 8-bit grayscale PNG (`value * 255`) and the
//! lossless `CRIM` float format.
//!
//! ```text
//! "CRIM" | dtype u8 (0 = f32, 1 = f64) | 3 reserved | H u32 | W u32 | data
//! ```
//! Header integers are big-endian, samples little-endian, row-major.

use std::io::Cursor;

use image::{GrayImage, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::tma::maps::{RoiMask, SimilarityMap};

pub const CRIM_MAGIC: [u8; 4] = *b"CRIM";
const CRIM_HEADER: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatType {
    F32 = 0,
    F64 = 1,
}

pub fn encode_png(height: usize, width: usize, values: &[f32]) -> Result<Vec<u8>> {
    let img = GrayImage::from_fn(width as u32, height as u32, |x, y| {
        let v = values[y as usize * width + x as usize];
        Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    let img = image::load_from_memory(bytes)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok((h as usize, w as usize, img.pixels().map(|p| p.0[0] as f32 / 255.0).collect()))
}

pub fn encode_crim(height: usize, width: usize, values: &[f32], dtype: FloatType) -> Vec<u8> {
    let width_bytes = if dtype == FloatType::F32 { 4 } else { 8 };
    let mut out = Vec::with_capacity(CRIM_HEADER + values.len() * width_bytes);
    out.extend_from_slice(&CRIM_MAGIC);
    out.extend_from_slice(&[dtype as u8, 0, 0, 0]);
    out.extend_from_slice(&(height as u32).to_be_bytes());
    out.extend_from_slice(&(width as u32).to_be_bytes());
    for &v in values {
        match dtype {
            FloatType::F32 => out.extend_from_slice(&v.to_le_bytes()),
            FloatType::F64 => out.extend_from_slice(&(v as f64).to_le_bytes()),
        }
    }
    out
}

pub fn decode_crim(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < CRIM_HEADER || bytes[..4] != CRIM_MAGIC {
        return Err(Error::InvalidInput("not a CRIM file".into()));
    }
    let size = match bytes[4] {
        0 => 4,
        1 => 8,
        d => return Err(Error::InvalidInput(format!("unknown CRIM dtype {d}"))),
    };
    let h = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_be_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[CRIM_HEADER..];
    if h.checked_mul(w).and_then(|n| n.checked_mul(size)) != Some(body.len()) {
        return Err(Error::InvalidInput(format!(
            "CRIM body has {} bytes for {h}x{w} samples of {size} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(size)
        .map(|c| match size {
            4 => f32::from_le_bytes(c.try_into().unwrap()),
            _ => f64::from_le_bytes(c.try_into().unwrap()) as f32,
        })
        .collect();
    Ok((h, w, values))
}

/// Decodes either format, by magic bytes.
pub fn decode_any(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.starts_with(&CRIM_MAGIC) {
        decode_crim(bytes)
    } else {
        decode_png(bytes)
    }
}

impl SimilarityMap {
    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_png(self.height(), self.width(), self.data())
    }

    pub fn to_crim(&self) -> Vec<u8> {
        encode_crim(self.height(), self.width(), self.data(), FloatType::F32)
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, w, v) = decode_any(bytes)?;
        Self::new(h, w, v)
    }
}

impl RoiMask {
    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_png(self.height(), self.width(), &self.values())
    }

    pub fn to_crim(&self) -> Vec<u8> {
        encode_crim(self.height(), self.width(), &self.values(), FloatType::F32)
    }

    /// Rebuilds a mask from its values: 1 marks the ROI and every other
    /// sample must share a single value.
    pub fn from_values(height: usize, width: usize, values: &[f32]) -> Result<Self> {
        let mut sigma = None;
        for &v in values {
            if v != 1.0 {
                match sigma {
                    None => sigma = Some(v),
                    Some(s) if s == v => {}
                    Some(s) => {
                        return Err(Error::InvalidInput(format!("mask has more than two values ({s}, {v})")));
                    }
                }
            }
        }
        let roi = values.iter().map(|&v| v == 1.0).collect();
        Self::from_indicator(height, width, roi, sigma.unwrap_or(1.0))
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, w, v) = decode_any(bytes)?;
        Self::from_values(h, w, &v)
    }
}
