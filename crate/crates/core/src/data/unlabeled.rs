//! Unlabeled images for codec pre-training, served as seeded random crops.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::image::ImagePlane;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Clone, Debug)]
pub struct UnlabeledDataset {
    crop: usize,
    seed: u64,
    images: Vec<ImagePlane>,
    paths: Vec<PathBuf>,
    skipped: usize,
}

/// Scales so the short side is at least `min_side`, bicubic, keeping the
/// aspect ratio.
pub fn upscale_short_side(img: &image::RgbImage, min_side: u32) -> image::RgbImage {
    let (w, h) = img.dimensions();
    let short = w.min(h);
    if short >= min_side {
        return img.clone();
    }
    let scale = min_side as f64 / short as f64;
    let nw = ((w as f64 * scale).round() as u32).max(min_side);
    let nh = ((h as f64 * scale).round() as u32).max(min_side);
    image::imageops::resize(img, nw, nh, FilterType::CatmullRom)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Indexes every decodable image under `root` (sorted by path). Files that
/// fail to decode are counted in [`UnlabeledDataset::skipped`].
pub fn load_unlabeled(root: impl AsRef<Path>, crop: usize, seed: u64) -> Result<UnlabeledDataset> {
    let root = root.as_ref();
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && is_image(e.path()))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let mut images = Vec::new();
    let mut paths = Vec::new();
    let mut skipped = 0;
    for path in files {
        match image::open(&path) {
            Ok(img) => {
                let rgb = upscale_short_side(&img.to_rgb8(), crop as u32);
                images.push(ImagePlane::from_rgb8(&rgb));
                paths.push(path);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
            }
        }
    }
    if images.is_empty() {
        return Err(Error::Dataset(format!(
            "no decodable images under {} ({skipped} skipped)",
            root.display()
        )));
    }
    Ok(UnlabeledDataset { crop, seed, images, paths, skipped })
}

impl UnlabeledDataset {
    /// In-memory images; each must already be at least `crop` on both sides.
    pub fn from_images(images: Vec<ImagePlane>, crop: usize, seed: u64) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Dataset("no images".into()));
        }
        if let Some(i) = images.iter().position(|im| im.height() < crop || im.width() < crop) {
            return Err(Error::Dataset(format!("image {i} is smaller than the crop size {crop}")));
        }
        Ok(Self { crop, seed, images, paths: Vec::new(), skipped: 0 })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn crop_size(&self) -> usize {
        self.crop
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn image(&self, index: usize) -> &ImagePlane {
        &self.images[index]
    }

    /// One random crop of a uniformly chosen image.
    pub fn sample_crop<R: Rng>(&self, rng: &mut R) -> ImagePlane {
        let img = &self.images[rng.gen_range(0..self.images.len())];
        let top = rng.gen_range(0..=img.height() - self.crop);
        let left = rng.gen_range(0..=img.width() - self.crop);
        img.crop_at(top, left, self.crop, self.crop).expect("crop fits by construction")
    }

    /// The dataset's own deterministic crop sequence.
    pub fn crops(&self) -> impl Iterator<Item = ImagePlane> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        std::iter::repeat_with(move || self.sample_crop(&mut rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upscale_rule() {
        let img = image::RgbImage::new(300, 100);
        let up = upscale_short_side(&img, 256);
        assert_eq!(up.dimensions(), (768, 256));
        let big = image::RgbImage::new(300, 300);
        assert_eq!(upscale_short_side(&big, 256).dimensions(), (300, 300));
    }

    #[test]
    fn crops_are_deterministic_and_in_range() {
        let images = (0..3)
            .map(|k| ImagePlane::from_fn(80, 96, |h, w, c| ((h * 3 + w * 5 + c + k) % 29) as f32 / 28.0))
            .collect();
        let ds = UnlabeledDataset::from_images(images, 64, 7).unwrap();
        let a: Vec<_> = ds.crops().take(5).collect();
        let b: Vec<_> = ds.crops().take(5).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.height() == 64 && c.width() == 64));
        assert!(a.iter().flat_map(|c| c.data()).all(|v| (0.0..=1.0).contains(v)));
    }
}
