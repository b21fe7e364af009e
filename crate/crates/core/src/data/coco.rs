//! COCO-style annotated images: polygon and RLE rasterization, per-category
//! union masks at a fixed working size, and a JSON manifest cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::tma::BinaryMask;

/// Side length every annotated image and mask is resized to.
pub const ANNOTATED_SIZE: usize = 256;

#[derive(Debug, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: usize,
    height: usize,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    segmentation: Segmentation,
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// The two COCO segmentation encodings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle(Rle),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`.
    pub size: [usize; 2],
    pub counts: RleCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Raw(Vec<u32>),
    Compressed(String),
}

/// Even-odd scanline fill sampled at pixel centres; a flat list of
/// `x0, y0, x1, y1, ...` describes one ring.
pub fn rasterize_polygon(points: &[f64], height: usize, width: usize) -> Result<BinaryMask> {
    if points.len() < 6 || points.len() % 2 != 0 {
        return Err(Error::Dataset(format!(
            "polygon needs at least 3 points, got {} coordinates",
            points.len()
        )));
    }
    let pts: Vec<(f64, f64)> = points.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let mut data = vec![false; height * width];
    let mut xs = Vec::new();
    for row in 0..height {
        let yc = row as f64 + 0.5;
        xs.clear();
        for k in 0..pts.len() {
            let (x1, y1) = pts[k];
            let (x2, y2) = pts[(k + 1) % pts.len()];
            if (y1 <= yc) != (y2 <= yc) {
                xs.push(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let start = (pair[0] - 0.5).ceil().max(0.0) as usize;
            let end = ((pair[1] - 0.5).ceil().max(0.0) as usize).min(width);
            for col in start..end {
                data[row * width + col] = true;
            }
        }
    }
    BinaryMask::new(height, width, data)
}

/// Shoelace area of a flat coordinate list.
pub fn polygon_area(points: &[f64]) -> f64 {
    let n = points.len() / 2;
    let mut acc = 0.0;
    for k in 0..n {
        let (x1, y1) = (points[2 * k], points[2 * k + 1]);
        let (x2, y2) = (points[2 * ((k + 1) % n)], points[2 * ((k + 1) % n) + 1]);
        acc += x1 * y2 - x2 * y1;
    }
    acc.abs() / 2.0
}

/// Decodes COCO's compressed count string (6-bit groups, delta-coded from
/// the third run on).
pub fn decode_rle_string(s: &str) -> Result<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let c = *bytes
                .get(p)
                .ok_or_else(|| Error::Dataset("truncated RLE string".into()))? as i64
                - 48;
            if !(0..64).contains(&c) || k > 12 {
                return Err(Error::Dataset("invalid RLE string".into()));
            }
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u32::try_from(c).map_err(|_| Error::Dataset(format!("negative RLE run {c}"))))
        .collect()
}

/// Inverse of [`decode_rle_string`].
pub fn encode_rle_string(counts: &[u32]) -> String {
    let mut out = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut ch = x & 0x1f;
            x >>= 5;
            let more = if ch & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                ch |= 0x20;
            }
            out.push((ch + 48) as u8 as char);
            if !more {
                break;
            }
        }
    }
    out
}

/// Column-major runs, alternating background and foreground, starting with
/// background.
pub fn rle_to_mask(counts: &[u32], height: usize, width: usize) -> Result<BinaryMask> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total != (height * width) as u64 {
        return Err(Error::Dataset(format!(
            "RLE covers {total} pixels, image has {}",
            height * width
        )));
    }
    let mut data = vec![false; height * width];
    let mut pos = 0usize;
    for (k, &c) in counts.iter().enumerate() {
        if k % 2 == 1 {
            for idx in pos..pos + c as usize {
                let (col, row) = (idx / height, idx % height);
                data[row * width + col] = true;
            }
        }
        pos += c as usize;
    }
    BinaryMask::new(height, width, data)
}

pub fn mask_to_rle(mask: &BinaryMask) -> Vec<u32> {
    let (h, w) = (mask.height(), mask.width());
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for col in 0..w {
        for row in 0..h {
            let v = mask.get(row, col);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

pub fn rasterize(seg: &Segmentation, height: usize, width: usize) -> Result<BinaryMask> {
    match seg {
        Segmentation::Polygons(rings) => {
            if rings.is_empty() {
                return Err(Error::Dataset("empty polygon list".into()));
            }
            let mut acc = BinaryMask::filled(height, width, false);
            for ring in rings {
                acc = acc.union(&rasterize_polygon(ring, height, width)?)?;
            }
            Ok(acc)
        }
        Segmentation::Rle(rle) => {
            if rle.size != [height, width] {
                return Err(Error::Dataset(format!(
                    "RLE size {:?} differs from image {height}x{width}",
                    rle.size
                )));
            }
            let counts = match &rle.counts {
                RleCounts::Raw(c) => c.clone(),
                RleCounts::Compressed(s) => decode_rle_string(s)?,
            };
            rle_to_mask(&counts, height, width)
        }
    }
}

/// One image with its per-category masks, both at the working size.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedRecord {
    pub id: u64,
    pub file_name: String,
    pub image: ImagePlane,
    pub masks: BTreeMap<String, BinaryMask>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnnotatedDataset {
    pub records: Vec<AnnotatedRecord>,
    /// Annotations dropped for having no pixels.
    pub dropped_empty: usize,
}

pub fn resize_image(img: &ImagePlane, size: usize) -> ImagePlane {
    if img.height() == size && img.width() == size {
        return img.clone();
    }
    let rgb = image::imageops::resize(&img.to_rgb8(), size as u32, size as u32, FilterType::CatmullRom);
    ImagePlane::from_rgb8(&rgb)
}

/// Reads a COCO-style manifest; image paths are relative to its directory.
pub fn load_annotated(manifest: impl AsRef<Path>) -> Result<AnnotatedDataset> {
    let manifest = manifest.as_ref();
    let root = manifest.parent().unwrap_or(Path::new("."));
    let text = std::fs::read(manifest)?;
    let coco: CocoFile = serde_json::from_slice(&text)
        .map_err(|e| Error::Dataset(format!("{}: {e}", manifest.display())))?;
    let categories: BTreeMap<u64, String> = coco.categories.into_iter().map(|c| (c.id, c.name)).collect();

    let mut records = Vec::with_capacity(coco.images.len());
    let mut index = BTreeMap::new();
    for im in &coco.images {
        if index.insert(im.id, records.len()).is_some() {
            return Err(Error::Dataset(format!("image {}: duplicate id", im.id)));
        }
        let path: PathBuf = root.join(&im.file_name);
        let image = ImagePlane::load(&path).map_err(|e| Error::Dataset(format!("image {}: {e}", im.id)))?;
        if (image.height(), image.width()) != (im.height, im.width) {
            return Err(Error::Dataset(format!(
                "image {}: file is {}x{}, manifest says {}x{}",
                im.id,
                image.height(),
                image.width(),
                im.height,
                im.width
            )));
        }
        records.push(AnnotatedRecord {
            id: im.id,
            file_name: im.file_name.clone(),
            image: resize_image(&image, ANNOTATED_SIZE),
            masks: BTreeMap::new(),
        });
    }

    let mut dropped_empty = 0;
    for ann in &coco.annotations {
        let &ri = index
            .get(&ann.image_id)
            .ok_or_else(|| Error::Dataset(format!("annotation {}: unknown image {}", ann.id, ann.image_id)))?;
        let name = categories
            .get(&ann.category_id)
            .ok_or_else(|| Error::Dataset(format!("annotation {}: unknown category {}", ann.id, ann.category_id)))?;
        let im = &coco.images[ri];
        let mask = rasterize(&ann.segmentation, im.height, im.width)
            .map_err(|e| Error::Dataset(format!("annotation {}: {e}", ann.id)))?;
        if mask.count() == 0 {
            dropped_empty += 1;
            continue;
        }
        let mask = mask.resize_nearest(ANNOTATED_SIZE, ANNOTATED_SIZE);
        let rec = &mut records[ri];
        let merged = match rec.masks.remove(name) {
            Some(existing) => existing.union(&mask)?,
            None => mask,
        };
        rec.masks.insert(name.clone(), merged);
    }
    Ok(AnnotatedDataset { records, dropped_empty })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCache {
    size: usize,
    records: Vec<CachedRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedRecord {
    id: u64,
    file_name: String,
    categories: BTreeMap<String, String>,
}

impl AnnotatedDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The category table as a single JSON document (masks as compressed RLE).
    pub fn cache_json(&self) -> Result<Vec<u8>> {
        let cache = ManifestCache {
            size: ANNOTATED_SIZE,
            records: self
                .records
                .iter()
                .map(|r| CachedRecord {
                    id: r.id,
                    file_name: r.file_name.clone(),
                    categories: r
                        .masks
                        .iter()
                        .map(|(k, m)| (k.clone(), encode_rle_string(&mask_to_rle(m))))
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_vec_pretty(&cache)?)
    }

    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.cache_json()?)?;
        Ok(())
    }

    /// Restores masks from a cache; `images` supplies each record's pixels by
    /// file name.
    pub fn from_cache_json(bytes: &[u8], mut images: impl FnMut(&str) -> Result<ImagePlane>) -> Result<Self> {
        let cache: ManifestCache =
            serde_json::from_slice(bytes).map_err(|e| Error::Dataset(format!("manifest cache: {e}")))?;
        let mut records = Vec::with_capacity(cache.records.len());
        for r in cache.records {
            let mut masks = BTreeMap::new();
            for (k, s) in r.categories {
                let counts = decode_rle_string(&s)?;
                masks.insert(k, rle_to_mask(&counts, cache.size, cache.size)?);
            }
            let image = resize_image(&images(&r.file_name)?, cache.size);
            records.push(AnnotatedRecord { id: r.id, file_name: r.file_name, image, masks });
        }
        Ok(Self { records, dropped_empty: 0 })
    }

    /// Loads a cache written next to the images it refers to.
    pub fn load_cache(path: impl AsRef<Path>, image_root: impl AsRef<Path>) -> Result<Self> {
        let root = image_root.as_ref();
        Self::from_cache_json(&std::fs::read(path)?, |name| ImagePlane::load(root.join(name)))
    }
}
