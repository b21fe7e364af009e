//! Builds ROI masks for one synthetic scene from three similarity backends
//! and shows how the ROI grows as η drops.
//!
//! cargo run --example text_masks -- "red disc" /tmp/masks

use std::collections::HashMap;

use croi::data::synthetic_scene;
use croi::eval::ETA_GRID;
use croi::service::pipeline::{make_mask, Backends, MaskRequest};
use croi::tma::backend::PIXEL_FEATURES;
use croi::tma::{BackendKind, EmbeddingModel, PretrainedBackend};

/// A toy embedding: chroma directions plus a small constant that keeps grey
/// pixels away from every colour word.
fn toy_embedding() -> EmbeddingModel {
    let mut projection = vec![0.0; 4 * PIXEL_FEATURES];
    for c in 0..3 {
        projection[c * PIXEL_FEATURES + c] = 1.0;
        projection[c * PIXEL_FEATURES + 3] = -1.0;
    }
    projection[3 * PIXEL_FEATURES + 7] = 0.1;
    let vocabulary = HashMap::from([
        ("red".to_string(), vec![1.0, -0.5, -0.5, 0.0]),
        ("green".to_string(), vec![-0.5, 1.0, -0.5, 0.0]),
        ("blue".to_string(), vec![-0.5, -0.5, 1.0, 0.0]),
    ]);
    EmbeddingModel { dim: 4, projection, vocabulary }
}

fn main() -> croi::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = args.next().unwrap_or_else(|| "red disc".into());
    let out = args.next();

    let scene = synthetic_scene(256, 7);
    let backends = Backends::with_pretrained(PretrainedBackend::from_model(toy_embedding())?);
    for (category, mask) in scene.category_masks() {
        backends.ground_truth().register(&scene.image, &category, mask)?;
    }
    println!("objects: {:?}", scene.category_masks().keys().collect::<Vec<_>>());

    for backend in [BackendKind::Synthetic, BackendKind::Pretrained, BackendKind::GroundTruth] {
        let prompt = if backend == BackendKind::GroundTruth {
            scene.category_masks().keys().next().cloned().unwrap_or_default()
        } else {
            text.clone()
        };
        let fractions: Vec<String> = ETA_GRID
            .iter()
            .map(|&eta| {
                let req = MaskRequest { text: prompt.clone(), eta: eta as f32, backend, ..MaskRequest::default() };
                make_mask(&backends, &scene.image, &req).map(|m| format!("{eta}: {:.3}", m.roi_pixel_fraction()))
            })
            .collect::<croi::Result<_>>()?;
        println!("{backend:>12} {prompt:?} ROI fraction by eta  {}", fractions.join("  "));

        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            let req = MaskRequest { text: prompt.clone(), backend, ..MaskRequest::default() };
            let m = make_mask(&backends, &scene.image, &req)?;
            std::fs::write(format!("{dir}/{backend}_mask.png"), m.mask.to_png()?)?;
        }
    }
    if let Some(dir) = &out {
        scene.image.save_png(format!("{dir}/scene.png"))?;
        println!("wrote {dir}/scene.png and one mask per backend");
    }
    Ok(())
}
