use croi::codec::{bpp, Bitstream, CodecConfig, Provenance};
use croi::data::synthetic_annotated;
use croi::eval::evaluate::{annotated_roi, evaluate_record, mask_from_annotation};
use croi::eval::{non_roi_psnr, psnr, roi_indicator, roi_psnr, run_sweep, EvalSettings, SweepKind, SweepSpec};
use croi::image::ImagePlane;
use croi::model::{ModelOptions, RoiCodec};
use croi::registry::{ModelKey, ModelRegistry};
use croi::tma::BinaryMask;
use croi::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Compensated sum of squared differences over the selected pixels.
fn oracle_psnr(x: &ImagePlane, y: &ImagePlane, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let (mut sum, mut comp, mut n) = (0.0f64, 0.0f64, 0usize);
    for h in 0..x.height() {
        for w in 0..x.width() {
            if !keep(h, w) {
                continue;
            }
            for c in 0..3 {
                let d = x.get(h, w, c) as f64 - y.get(h, w, c) as f64;
                let term = d * d - comp;
                let t = sum + term;
                comp = (t - sum) - term;
                sum = t;
                n += 1;
            }
        }
    }
    -10.0 * (sum / n as f64).log10()
}

fn random_pair(seed: u64, h: usize, w: usize) -> (ImagePlane, ImagePlane) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ImagePlane::from_fn(h, w, |_, _, _| rng.gen());
    let y = ImagePlane::from_fn(h, w, |h, w, c| (x.get(h, w, c) + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0));
    (x, y)
}

#[test]
fn psnr_matches_loop_oracle() {
    for seed in 0..5 {
        let (x, y) = random_pair(seed, 37, 53);
        assert!((psnr(&x, &y).unwrap() - oracle_psnr(&x, &y, |_, _| true)).abs() < 1e-9);
    }
    let x = ImagePlane::filled(3, 3, 0.2);
    assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
}

#[test]
fn roi_psnr_matches_masked_oracle() {
    let (x, y) = random_pair(7, 40, 40);
    let roi = BinaryMask::from_fn(40, 40, |_, w| w < 20);
    let want = oracle_psnr(&x, &y, |_, w| w < 20);
    assert!((roi_psnr(&x, &y, &roi).unwrap() - want).abs() < 1e-9);
    let rest = oracle_psnr(&x, &y, |_, w| w >= 20);
    assert!((non_roi_psnr(&x, &y, &roi).unwrap() - rest).abs() < 1e-9);

    let only_outside = ImagePlane::from_fn(40, 40, |h, w, c| if w < 20 { x.get(h, w, c) } else { 0.0 });
    assert_eq!(roi_psnr(&x, &only_outside, &roi).unwrap(), f64::INFINITY);
    assert!(matches!(roi_psnr(&x, &y, &BinaryMask::filled(40, 40, false)), Err(Error::EmptyRoi)));
    assert!(roi_psnr(&x, &y, &BinaryMask::filled(20, 40, true)).is_err());
}

#[test]
fn bpp_counts_container_bytes() {
    assert_eq!(bpp(1000, 100, 100), 0.8);
    let b = Bitstream {
        config_id: croi::codec::ConfigId::Desk,
        lambda_index: 1,
        height: 30,
        width: 20,
        provenance: Provenance::default(),
        z_payload: vec![1; 7],
        y_payload: vec![2; 11],
    };
    let bytes = b.to_bytes().unwrap();
    assert_eq!(b.bpp(), 8.0 * bytes.len() as f64 / 600.0);
    assert!(b.bpp() >= 8.0 * b.header_len() as f64 / 600.0);
}

#[test]
fn roi_indicator_is_nearest_neighbour() {
    let gt = BinaryMask::from_fn(32, 32, |h, w| h < 10 && w >= 7);
    let m = mask_from_annotation(&gt, 0.85, 0.3).unwrap();
    let full = roi_indicator(&m, 32, 32);
    for h in 0..32 {
        for w in 0..32 {
            assert_eq!(full.get(h, w), m.get(h / 2, w / 2) == 1.0);
        }
    }
}

fn trained(lambda_index: u8, options: ModelOptions) -> RoiCodec {
    let mut m = RoiCodec::new(CodecConfig::desk(lambda_index).unwrap(), options, 3);
    m.set_trained_stage(3);
    m
}

#[test]
fn eta_sweep_has_one_row_per_grid_value() {
    let ds = synthetic_annotated(2, 40);
    let reg = ModelRegistry::new(None);
    reg.insert(trained(1, ModelOptions::full())).unwrap();
    let export = tempfile::tempdir().unwrap();
    let table = run_sweep(&SweepSpec::new(SweepKind::Eta), &ds, &reg, Some(export.path())).unwrap();
    assert_eq!(table.points.len(), 5);
    assert_eq!(table.per_image.len(), 10);
    let etas: Vec<f64> = table.points.iter().map(|p| p.eta).collect();
    assert_eq!(etas, vec![0.95, 0.9, 0.85, 0.8, 0.75]);

    let csv = String::from_utf8(table.to_csv().unwrap()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("image_id,lambda_index,eta,sigma,bpp,psnr,roi_psnr"));
    assert_eq!(lines.count(), 5);
    let back: croi::eval::SweepTable = serde_json::from_str(&table.to_json().unwrap()).unwrap();
    assert_eq!(back.points, table.points);

    // Aggregates are dB-domain means of the per-image rows.
    let first: Vec<_> = table.per_image.iter().take(2).collect();
    let mean = (first[0].psnr + first[1].psnr) / 2.0;
    assert!((table.points[0].psnr - mean).abs() < 1e-12);
    assert!(export.path().join("eta_0.95").join("scene_000.png").is_file());

    let out = tempfile::tempdir().unwrap();
    table.write_to(out.path()).unwrap();
    for f in ["results.csv", "results.json", "per_image.csv"] {
        assert!(out.path().join(f).is_file());
    }
}

#[test]
fn sweeps_need_trained_models() {
    let ds = synthetic_annotated(1, 40);
    let reg = ModelRegistry::new(None);
    reg.insert(trained(1, ModelOptions::full())).unwrap();
    let err = run_sweep(&SweepSpec::new(SweepKind::Fusion), &ds, &reg, None).unwrap_err();
    assert!(matches!(err, Error::MissingModel(_)), "{err}");

    let untrained = ModelRegistry::new(None);
    for fusion in [croi::lma::Fusion::AddMul, croi::lma::Fusion::MulMul, croi::lma::Fusion::AddAdd] {
        untrained
            .insert(RoiCodec::new(CodecConfig::desk(1).unwrap(), ModelOptions { fusion, ..ModelOptions::full() }, 0))
            .unwrap();
    }
    let err = run_sweep(&SweepSpec::new(SweepKind::Fusion), &ds, &untrained, None).unwrap_err();
    assert!(matches!(err, Error::MissingModel(_)), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let from_dir = ModelRegistry::new(Some(dir.path().to_path_buf()));
    let key = ModelKey::new(croi::codec::ConfigId::Desk, 2, ModelOptions::full());
    assert!(matches!(from_dir.get(&key), Err(Error::MissingModel(_))));
    trained(2, ModelOptions::full()).save(dir.path().join(key.file_name().unwrap()), serde_json::json!({})).unwrap();
    assert_eq!(from_dir.get(&key).unwrap().config().lambda_index, 2);
    assert_eq!(from_dir.list().len(), 1);
}

#[test]
fn ig_sweep_labels_variants() {
    let ds = synthetic_annotated(1, 41);
    let reg = ModelRegistry::new(None);
    reg.insert(trained(1, ModelOptions::full())).unwrap();
    reg.insert(trained(1, ModelOptions { use_ig: false, ..ModelOptions::full() })).unwrap();
    let table = run_sweep(&SweepSpec::new(SweepKind::Ig), &ds, &reg, None).unwrap();
    let ids: Vec<&str> = table.points.iter().map(|p| p.image_id.as_str()).collect();
    assert_eq!(ids, ["mean@w/ IG", "mean@w/o IG"]);
    assert_eq!(table.points[1].model, "desk_lambda1_noig.crck");
}

#[test]
fn evaluation_uses_the_selected_category() {
    let ds = synthetic_annotated(1, 42);
    let rec = &ds.records[0];
    let model = trained(1, ModelOptions::full());
    let cat = rec.masks.keys().next().unwrap().clone();
    let settings = EvalSettings { category: Some(cat.clone()), ..EvalSettings::default() };
    let e = evaluate_record(&model, rec, &settings).unwrap();
    assert!(e.roi_psnr.is_some() && e.non_roi_psnr.is_some());
    let roi = annotated_roi(&rec.masks, Some(&cat), 256, 256);
    assert_eq!(roi, rec.masks[&cat]);
    let missing = EvalSettings { category: Some("unicorn".into()), ..EvalSettings::default() };
    assert_eq!(evaluate_record(&model, rec, &missing).unwrap().roi_psnr, None);
}
