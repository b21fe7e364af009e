//! Trains a desk-scale model through all three stages on the bundled
//! 50-image synthetic set, finishing stage 3 on 128-pixel crops, then reports
//! ROI and non-ROI PSNR on a held-out split.
//!
//! cargo run --release --example three_stage_training -- 4000 1000 4000 1000 models/desk_lambda1.crck

use std::time::Instant;

use croi::codec::CodecConfig;
use croi::data::{bundled_synthetic, synthetic_annotated, UnlabeledDataset};
use croi::eval::{evaluate_record, EvalSettings};
use croi::model::{ModelOptions, RoiCodec};
use croi::train::{run_stage, TrainingData, TrainingPlan};

fn main() -> croi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps = |i: usize, d: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let budgets = [steps(0, 4000), steps(1, 1000), steps(2, 4000)];
    let finish = steps(3, 1000);
    let out = args.get(4).cloned();

    let train = bundled_synthetic();
    let holdout = synthetic_annotated(20, 1_000_000);
    let crops = UnlabeledDataset::from_images(train.records.iter().map(|r| r.image.clone()).collect(), 64, 0)?;

    let mut model = RoiCodec::new(CodecConfig::desk(1)?, ModelOptions::full(), 0);
    let mut log = std::io::stderr();
    for (i, &n) in budgets.iter().enumerate() {
        let stage = i as u8 + 1;
        let plan = TrainingPlan::new(stage, n).with_crop(64).with_seed(stage as u64).with_log_every(50);
        let data = if stage == 1 {
            TrainingData::Unlabeled(&crops)
        } else {
            TrainingData::Annotated(&train)
        };
        let t = Instant::now();
        let report = run_stage(&mut model, &plan, data, Some(&mut log))?;
        let w = report.windowed_losses(n.div_ceil(5).max(1));
        println!("stage {stage}: {n} steps in {:.0?}, windowed loss {w:.3?}", t.elapsed());
    }
    if finish > 0 {
        let plan = TrainingPlan::new(3, finish).with_crop(128).with_batch_size(2).with_seed(4).with_log_every(50);
        let t = Instant::now();
        run_stage(&mut model, &plan, TrainingData::Annotated(&train), Some(&mut log))?;
        println!("stage 3 at crop 128: {finish} steps in {:.0?}", t.elapsed());
    }
    if let Some(path) = out {
        model.save(&path, serde_json::json!({"dataset": "synthetic"}))?;
    }

    for sigma in [0.01, 0.9] {
        let settings = EvalSettings { sigma, ..EvalSettings::default() };
        let evals = holdout
            .records
            .iter()
            .map(|r| evaluate_record(&model, r, &settings))
            .collect::<croi::Result<Vec<_>>>()?;
        let avg = |f: &dyn Fn(&croi::eval::ImageEval) -> Option<f64>| {
            let v: Vec<f64> = evals.iter().filter_map(f).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        println!(
            "sigma {sigma}: bpp {:.3}  psnr {:.2}  roi-psnr {:.2}  non-roi psnr {:.2}",
            avg(&|e| Some(e.bpp)),
            avg(&|e| Some(e.psnr)),
            avg(&|e| e.roi_psnr),
            avg(&|e| e.non_roi_psnr)
        );
    }
    Ok(())
}
