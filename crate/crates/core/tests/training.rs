use std::collections::BTreeMap;

use croi::codec::CodecConfig;
use croi::data::{synthetic_annotated, AnnotatedDataset, AnnotatedRecord, UnlabeledDataset};
use croi::image::ImagePlane;
use croi::model::{ModelOptions, RoiCodec};
use croi::tma::{BinaryMask, RoiMask};
use croi::train::{
    rd_loss, run_stage, sample_training_example, weighted_distortion, MetricsRecord, TrainingData, TrainingPlan,
    SIGMA_POLICY,
};
use croi::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn checkerboard(h: usize, w: usize, sigma: f32) -> RoiMask {
    RoiMask::from_indicator(h, w, (0..h * w).map(|i| (i / w + i % w) % 2 == 0).collect(), sigma).unwrap()
}

/// `U(m)` by explicit bilinear sampling with half-pixel centres.
fn upsampled_weight(m: &RoiMask, i: usize, j: usize) -> f64 {
    let (h, w) = (m.height(), m.width());
    let sy = ((i as f64 + 0.5) / 2.0 - 0.5).max(0.0);
    let sx = ((j as f64 + 0.5) / 2.0 - 0.5).max(0.0);
    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
    let v = |a, b| m.get(a, b) as f64;
    (1.0 - fy) * ((1.0 - fx) * v(y0, x0) + fx * v(y0, x1)) + fy * ((1.0 - fx) * v(y1, x0) + fx * v(y1, x1))
}

#[test]
fn weighted_distortion_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = ImagePlane::from_fn(16, 12, |_, _, _| rng.gen());
    let y = ImagePlane::from_fn(16, 12, |_, _, _| rng.gen());
    let m = checkerboard(8, 6, 0.5);
    let mut sum = 0.0;
    for c in 0..3 {
        for i in 0..16 {
            for j in 0..12 {
                let r = (x.get(i, j, c) as f64 - y.get(i, j, c) as f64) * upsampled_weight(&m, i, j);
                sum += r * r;
            }
        }
    }
    let oracle = sum / (3.0 * 16.0 * 12.0);
    assert!((weighted_distortion(&x, &y, &m).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn weighted_distortion_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = ImagePlane::from_fn(8, 8, |_, _, _| rng.gen());
    let y = ImagePlane::from_fn(8, 8, |_, _, _| rng.gen());
    assert_eq!(weighted_distortion(&x, &x, &checkerboard(4, 4, 0.3)).unwrap(), 0.0);
    let mse: f64 = x.data().iter().zip(y.data()).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>() / 192.0;
    assert!((weighted_distortion(&x, &y, &RoiMask::full(4, 4)).unwrap() - mse).abs() < 1e-10);
    assert!(weighted_distortion(&x, &ImagePlane::filled(8, 4, 0.0), &RoiMask::full(4, 4)).is_err());
    assert!(weighted_distortion(&x, &y, &RoiMask::full(3, 4)).is_err());
}

#[test]
fn distortion_grows_with_sigma_for_background_errors() {
    let x = ImagePlane::filled(16, 16, 0.5);
    let roi: Vec<bool> = (0..64).map(|i| i / 8 < 4).collect();
    // Errors only well inside the bottom half, away from the blended border.
    let y = ImagePlane::from_fn(16, 16, |h, _, _| if h >= 10 { 0.7 } else { 0.5 });
    let mut last = -1.0;
    for sigma in [0.01, 0.1, 0.3, 0.9] {
        let m = RoiMask::from_indicator(8, 8, roi.clone(), sigma).unwrap();
        let d = weighted_distortion(&x, &y, &m).unwrap();
        assert!(d > last, "σ = {sigma}: {d} <= {last}");
        last = d;
    }
}

#[test]
fn rd_loss_properties() {
    let l = rd_loss(1e-4, 0.5, 1).unwrap();
    assert!((l.total - 0.584_532_5).abs() < 1e-12);
    assert_eq!(l.total, l.lambda * 255.0 * 255.0 * l.distortion + l.rate_bpp);
    let totals: Vec<f64> = (0..5).map(|i| rd_loss(2e-3, 0.3, i).unwrap().total).collect();
    assert!(totals.windows(2).all(|w| w[1] > w[0]));
    assert!(matches!(rd_loss(0.1, 0.1, 5), Err(Error::InvalidInput(_))));
    assert!(rd_loss(-1.0, 0.1, 0).is_err());
}

fn two_category_dataset() -> AnnotatedDataset {
    let mut masks = BTreeMap::new();
    masks.insert("cat".to_string(), BinaryMask::from_fn(32, 32, |h, _| h < 16));
    masks.insert("dog".to_string(), BinaryMask::from_fn(32, 32, |h, _| h >= 16));
    let record = AnnotatedRecord {
        id: 1,
        file_name: "a.png".into(),
        image: ImagePlane::filled(32, 32, 0.5),
        masks,
    };
    AnnotatedDataset {
        records: vec![record],
        dropped_empty: 0,
    }
}

#[test]
fn category_and_sigma_draws_are_uniform() {
    let ds = two_category_dataset();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let mut cats = BTreeMap::new();
    let mut sigmas = BTreeMap::new();
    for _ in 0..n {
        let ex = sample_training_example(&ds, &SIGMA_POLICY, &mut rng).unwrap();
        *cats.entry(ex.category.unwrap()).or_insert(0usize) += 1;
        *sigmas.entry((ex.sigma * 100.0) as u32).or_insert(0usize) += 1;
    }
    for count in cats.values() {
        assert!((*count as f64 / n as f64 - 0.5).abs() <= 0.02, "{cats:?}");
    }
    assert_eq!(sigmas.len(), 5);
    for count in sigmas.values() {
        assert!((*count as f64 / n as f64 - 0.2).abs() <= 0.02, "{sigmas:?}");
    }
}

#[test]
fn single_category_and_unannotated_images() {
    let mut ds = two_category_dataset();
    ds.records[0].masks.remove("dog");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        assert_eq!(sample_training_example(&ds, &SIGMA_POLICY, &mut rng).unwrap().category.as_deref(), Some("cat"));
    }
    ds.records[0].masks.clear();
    assert_eq!(sample_training_example(&ds, &SIGMA_POLICY, &mut rng).unwrap().category, None);
}

fn tiny_model() -> RoiCodec {
    RoiCodec::new(CodecConfig::desk(1).unwrap(), ModelOptions::full(), 11)
}

fn crops() -> UnlabeledDataset {
    let ds = synthetic_annotated(3, 5);
    UnlabeledDataset::from_images(ds.records.into_iter().map(|r| r.image).collect(), 64, 0).unwrap()
}

#[test]
fn seeded_runs_repeat_their_first_losses() {
    let data = crops();
    let plan = TrainingPlan::new(1, 2).with_batch_size(2).with_seed(42);
    let mut a = tiny_model();
    let mut b = tiny_model();
    let ra = run_stage(&mut a, &plan, TrainingData::Unlabeled(&data), None).unwrap();
    let rb = run_stage(&mut b, &plan, TrainingData::Unlabeled(&data), None).unwrap();
    assert_eq!(ra.step_losses, rb.step_losses);
    assert_eq!(ra.step_losses.len(), 2);
    assert_eq!(a.trained_stage(), 1);
}

#[test]
fn stage_prerequisites() {
    let ds = synthetic_annotated(2, 0);
    let mut m = tiny_model();
    let plan2 = TrainingPlan::new(2, 1).with_batch_size(1).with_crop(64);
    assert!(matches!(
        run_stage(&mut m, &plan2, TrainingData::Annotated(&ds), None),
        Err(Error::MissingPrerequisite(_))
    ));
    m.set_trained_stage(1);
    let data = crops();
    assert!(matches!(
        run_stage(&mut m, &plan2, TrainingData::Unlabeled(&data), None),
        Err(Error::MissingPrerequisite(_))
    ));
    let mut plan = TrainingPlan::new(1, 1);
    plan.lambda_index = Some(3);
    assert!(matches!(
        run_stage(&mut m, &plan, TrainingData::Unlabeled(&data), None),
        Err(Error::ConfigMismatch(_))
    ));
    assert!(run_stage(&mut m, &TrainingPlan::new(4, 1), TrainingData::Unlabeled(&data), None).is_err());
}

#[test]
fn stage_two_freezes_everything_but_mr_and_logs_ndjson() {
    let ds = synthetic_annotated(2, 0);
    let mut m = tiny_model();
    m.set_trained_stage(1);
    let before: Vec<_> = m.store().entries().iter().map(|e| (e.name.clone(), e.value.clone())).collect();
    let plan = TrainingPlan::new(2, 2).with_batch_size(2).with_crop(64).with_log_every(1);
    let mut log = Vec::new();
    let report = run_stage(&mut m, &plan, TrainingData::Annotated(&ds), Some(&mut log)).unwrap();
    assert_eq!(report.frozen_digest_before, report.frozen_digest_after);
    let mut mr_changed = false;
    for ((name, old), e) in before.iter().zip(m.store().entries()) {
        if name.starts_with("mr.") {
            mr_changed |= *old != e.value;
        } else {
            assert_eq!(*old, e.value, "{name} changed");
        }
    }
    assert!(mr_changed);

    let text = String::from_utf8(log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    for key in ["step", "stage", "loss", "D", "R_bpp", "psnr", "roi_psnr"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let rec: MetricsRecord = serde_json::from_str(lines[1]).unwrap();
    assert_eq!((rec.step, rec.stage), (1, 2));
}

#[test]
fn stage_one_only_updates_the_codec() {
    let data = crops();
    let mut m = tiny_model();
    let before: Vec<_> = m.store().entries().iter().map(|e| e.value.clone()).collect();
    run_stage(&mut m, &TrainingPlan::new(1, 1).with_batch_size(1), TrainingData::Unlabeled(&data), None).unwrap();
    for (old, e) in before.iter().zip(m.store().entries()) {
        if !e.name.starts_with("codec.") {
            assert_eq!(*old, e.value, "{} changed", e.name);
        }
    }
}

#[test]
fn checkpoint_keeps_the_completed_stage() {
    let mut m = tiny_model();
    m.set_trained_stage(2);
    let back = RoiCodec::from_checkpoint(&m.to_checkpoint(serde_json::json!({}))).unwrap();
    assert_eq!(back.trained_stage(), 2);
}

#[test]
fn stage_one_loss_falls_epoch_over_epoch() {
    let images = (0..500).map(|k| croi::data::synthetic_scene(64, 10_000 + k).image).collect();
    let data = UnlabeledDataset::from_images(images, 64, 3).unwrap();
    let batch = 2;
    let plan = TrainingPlan::new(1, 2000).with_batch_size(batch).with_seed(9);
    let mut m = tiny_model();
    let report = run_stage(&mut m, &plan, TrainingData::Unlabeled(&data), None).unwrap();
    let epochs = report.windowed_losses(data.len() / batch);
    println!("epoch averages {epochs:.3?}");
    assert!(epochs.windows(2).all(|w| w[1] < w[0]), "{epochs:?}");
}
