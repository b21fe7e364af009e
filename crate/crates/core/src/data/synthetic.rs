//! A deterministic annotated set of textured scenes with coloured shapes.
//!
//! Backgrounds are low-saturation textures so they carry real information;
//! shapes are saturated, share the texture, and are labelled by colour and
//! form ("red disc", "green square", "blue triangle").

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::data::coco::{
    encode_rle_string, mask_to_rle, rasterize_polygon, AnnotatedDataset, AnnotatedRecord,
};
use crate::error::Result;
use crate::image::ImagePlane;
use crate::tma::BinaryMask;

pub const CATEGORIES: [&str; 3] = ["red disc", "green square", "blue triangle"];
const COLORS: [[f32; 3]; 3] = [[0.86, 0.16, 0.14], [0.18, 0.78, 0.22], [0.16, 0.24, 0.88]];

#[derive(Clone, Debug)]
enum Shape {
    Disc { cx: f64, cy: f64, r: f64 },
    Polygon(Vec<f64>),
}

impl Shape {
    fn mask(&self, size: usize) -> BinaryMask {
        match self {
            Shape::Disc { cx, cy, r } => BinaryMask::from_fn(size, size, |h, w| {
                let (dx, dy) = (w as f64 + 0.5 - cx, h as f64 + 0.5 - cy);
                dx * dx + dy * dy <= r * r
            }),
            Shape::Polygon(pts) => rasterize_polygon(pts, size, size).expect("valid polygon"),
        }
    }
}

/// One generated scene: pixels plus shapes and their category ids.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub image: ImagePlane,
    objects: Vec<(usize, Shape)>,
}

fn texture(rng: &mut ChaCha8Rng) -> impl Fn(usize, usize) -> f32 {
    let waves: Vec<(f32, f32, f32, f32)> = (0..3)
        .map(|_| {
            let freq = rng.gen_range(0.05f32..0.45);
            let angle = rng.gen_range(0.0..std::f32::consts::PI);
            (freq * angle.cos(), freq * angle.sin(), rng.gen_range(0.0..6.3), rng.gen_range(0.03..0.07))
        })
        .collect();
    let salt: u32 = rng.gen();
    move |h, w| {
        let mut t: f32 = waves.iter().map(|&(fx, fy, ph, a)| a * (fx * w as f32 + fy * h as f32 + ph).sin()).sum();
        // Cheap per-pixel hash noise.
        let mut x = (h as u32).wrapping_mul(0x9E37_79B1) ^ (w as u32).wrapping_mul(0x85EB_CA77) ^ salt;
        x ^= x >> 15;
        x = x.wrapping_mul(0x2C1B_3C6D);
        x ^= x >> 12;
        t += ((x & 0xFFFF) as f32 / 65535.0 - 0.5) * 0.06;
        t
    }
}

/// Renders one `size x size` scene with one to three shapes.
pub fn synthetic_scene(size: usize, seed: u64) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let base = rng.gen_range(0.35f32..0.65);
    let tint: [f32; 3] = [0, 1, 2].map(|_| rng.gen_range(-0.04f32..0.04));
    let tex = texture(&mut rng);
    let n_objects = rng.gen_range(1..=3);
    let mut objects = Vec::new();
    for _ in 0..n_objects {
        let cat = rng.gen_range(0..CATEGORIES.len());
        let shape = match cat {
            0 => {
                let r = rng.gen_range(0.1..0.22) * s;
                Shape::Disc { cx: rng.gen_range(r..s - r), cy: rng.gen_range(r..s - r), r }
            }
            1 => {
                let half = rng.gen_range(0.1..0.2) * s;
                let (cx, cy) = (rng.gen_range(half..s - half), rng.gen_range(half..s - half));
                let a: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
                Shape::Polygon(
                    (0..4)
                        .flat_map(|k| {
                            let t = a + k as f64 * std::f64::consts::FRAC_PI_2;
                            [cx + half * std::f64::consts::SQRT_2 * t.cos(), cy + half * std::f64::consts::SQRT_2 * t.sin()]
                        })
                        .map(|v| v.clamp(0.0, s))
                        .collect(),
                )
            }
            _ => {
                let r = rng.gen_range(0.14..0.26) * s;
                let (cx, cy) = (rng.gen_range(r..s - r), rng.gen_range(r..s - r));
                let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                Shape::Polygon(
                    (0..3)
                        .flat_map(|k| {
                            let t = a + k as f64 * std::f64::consts::TAU / 3.0;
                            [cx + r * t.cos(), cy + r * t.sin()]
                        })
                        .collect(),
                )
            }
        };
        objects.push((cat, shape));
    }
    let masks: Vec<BinaryMask> = objects.iter().map(|(_, sh)| sh.mask(size)).collect();
    let image = ImagePlane::from_fn(size, size, |h, w, c| {
        let t = tex(h, w);
        match masks.iter().rposition(|m| m.get(h, w)) {
            Some(k) => COLORS[objects[k].0][c] * (1.0 + 1.5 * t),
            None => base + tint[c] + t,
        }
    });
    SyntheticScene { image, objects }
}

impl SyntheticScene {
    /// Union mask per category name. Later shapes occlude earlier ones.
    pub fn category_masks(&self) -> BTreeMap<String, BinaryMask> {
        let size = self.image.height();
        let shape_masks: Vec<BinaryMask> = self.objects.iter().map(|(_, s)| s.mask(size)).collect();
        let mut out: BTreeMap<String, BinaryMask> = BTreeMap::new();
        for (k, (cat, _)) in self.objects.iter().enumerate() {
            let visible = BinaryMask::from_fn(size, size, |h, w| {
                shape_masks[k].get(h, w) && !shape_masks[k + 1..].iter().any(|m| m.get(h, w))
            });
            if visible.count() == 0 {
                continue;
            }
            let name = CATEGORIES[*cat].to_string();
            let merged = match out.remove(&name) {
                Some(m) => m.union(&visible).expect("same size"),
                None => visible,
            };
            out.insert(name, merged);
        }
        out
    }
}

/// Size and seed of the bundled annotated set.
pub const BUNDLED_SIZE: usize = 50;
pub const BUNDLED_SEED: u64 = 0;

/// First seed of held-out scenes; far from the bundled seeds.
pub const HOLDOUT_SEED: u64 = 1_000_000;

/// The bundled 50-scene annotated set. It is regenerated bit-exactly from
/// its seed rather than stored.
pub fn bundled_synthetic() -> AnnotatedDataset {
    synthetic_annotated(BUNDLED_SIZE, BUNDLED_SEED)
}

/// `count` scenes of 256 x 256 generated from consecutive seeds.
pub fn synthetic_annotated(count: usize, seed: u64) -> AnnotatedDataset {
    let records = (0..count)
        .map(|i| {
            let scene = synthetic_scene(crate::data::coco::ANNOTATED_SIZE, seed.wrapping_add(i as u64));
            AnnotatedRecord {
                id: i as u64 + 1,
                file_name: format!("scene_{i:03}.png"),
                masks: scene.category_masks(),
                image: scene.image,
            }
        })
        .collect();
    AnnotatedDataset { records, dropped_empty: 0 }
}

/// Writes the set as PNGs plus a COCO manifest (`annotations.json`) that uses
/// compressed RLE for every mask, so loading reproduces it exactly.
pub fn write_synthetic_coco(dir: impl AsRef<Path>, count: usize, seed: u64) -> Result<AnnotatedDataset> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let ds = synthetic_annotated(count, seed);
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut next_ann = 1;
    for rec in &ds.records {
        rec.image.save_png(dir.join(&rec.file_name))?;
        images.push(json!({
            "id": rec.id, "file_name": rec.file_name,
            "width": rec.image.width(), "height": rec.image.height(),
        }));
        for (name, mask) in &rec.masks {
            let cat = CATEGORIES.iter().position(|c| c == name).expect("known category") + 1;
            annotations.push(json!({
                "id": next_ann, "image_id": rec.id, "category_id": cat, "iscrowd": 0,
                "area": mask.count(),
                "segmentation": {
                    "size": [mask.height(), mask.width()],
                    "counts": encode_rle_string(&mask_to_rle(mask)),
                },
            }));
            next_ann += 1;
        }
    }
    let categories: Vec<_> = CATEGORIES
        .iter()
        .enumerate()
        .map(|(i, c)| json!({"id": i + 1, "name": c}))
        .collect();
    let manifest = json!({"images": images, "annotations": annotations, "categories": categories});
    std::fs::write(dir.join("annotations.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(ds)
}
