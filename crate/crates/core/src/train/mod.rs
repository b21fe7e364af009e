//! Three-stage training: codec pre-training, mask-representation training
//! with everything else frozen, and joint fine-tuning.

pub mod loss;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::checkpoint::parameter_digest;
use crate::data::{AnnotatedDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::eval::metrics::{psnr, roi_indicator, roi_psnr};
use crate::image::ImagePlane;
use crate::model::{RoiCodec, CODEC_PREFIX, MR_PREFIX};
use crate::nn::{Adam, AdamConfig, Gradients, Graph, ParamId};
use crate::tma::backend::binary_similarity;
use crate::tma::{adjustable_binarization, BinarizationConfig, BinaryMask, RoiMask};

pub use loss::{rd_loss, weighted_distortion, LossBreakdown};

/// σ values drawn uniformly per training example.
pub const SIGMA_POLICY: [f32; 5] = [0.01, 0.1, 0.3, 0.5, 0.9];

/// Threshold used when turning ground-truth masks into training masks.
pub const TRAINING_ETA: f32 = 0.85;

/// Default step budgets for stages 1, 2 and 3.
pub const DEFAULT_STEPS: [usize; 3] = [50_000, 10_000, 20_000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub stage: u8,
    pub steps: usize,
    pub batch_size: usize,
    #[serde(skip, default)]
    pub adam: AdamConfig,
    /// Must equal the model's own λ index when set.
    pub lambda_index: Option<u8>,
    pub sigma_values: Vec<f32>,
    pub seed: u64,
    pub log_every: usize,
    /// Square training crop; `None` trains on whole images.
    pub crop: Option<usize>,
}

impl TrainingPlan {
    pub fn new(stage: u8, steps: usize) -> Self {
        Self {
            stage,
            steps,
            batch_size: 8,
            adam: AdamConfig::default(),
            lambda_index: None,
            sigma_values: SIGMA_POLICY.to_vec(),
            seed: 0,
            log_every: 100,
            crop: None,
        }
    }

    /// Plan with the default step budget of `stage`.
    pub fn default_for_stage(stage: u8) -> Result<Self> {
        validate_stage(stage)?;
        Ok(Self::new(stage, DEFAULT_STEPS[stage as usize - 1]))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_crop(mut self, crop: usize) -> Self {
        self.crop = Some(crop);
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_log_every(mut self, log_every: usize) -> Self {
        self.log_every = log_every;
        self
    }

    /// Whether parameter `name` is updated in this stage.
    pub fn trains(&self, name: &str) -> bool {
        match self.stage {
            1 => has_prefix(name, CODEC_PREFIX),
            2 => has_prefix(name, MR_PREFIX),
            _ => true,
        }
    }
}

fn has_prefix(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix).is_some_and(|rest| rest.starts_with('.'))
}

fn validate_stage(stage: u8) -> Result<()> {
    if (1..=3).contains(&stage) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("stage {stage} outside 1..=3")))
    }
}

/// Training images for a stage.
#[derive(Clone, Copy)]
pub enum TrainingData<'a> {
    Unlabeled(&'a UnlabeledDataset),
    Annotated(&'a AnnotatedDataset),
}

/// A drawn `(image, ROI category, σ)` triple.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub record: usize,
    /// `None` when the image has no annotations; the mask is then all ones.
    pub category: Option<String>,
    pub sigma: f32,
}

pub fn sample_training_example<R: Rng>(
    dataset: &AnnotatedDataset,
    sigma_values: &[f32],
    rng: &mut R,
) -> Result<TrainingExample> {
    if dataset.is_empty() {
        return Err(Error::Dataset("annotated dataset is empty".into()));
    }
    if sigma_values.is_empty() {
        return Err(Error::InvalidInput("empty σ policy".into()));
    }
    let record = rng.gen_range(0..dataset.len());
    let masks = &dataset.records[record].masks;
    let category = if masks.is_empty() {
        None
    } else {
        masks.keys().nth(rng.gen_range(0..masks.len())).cloned()
    };
    let sigma = sigma_values[rng.gen_range(0..sigma_values.len())];
    Ok(TrainingExample {
        record,
        category,
        sigma,
    })
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub stage: u8,
    pub loss: f64,
    #[serde(rename = "D")]
    pub distortion: f64,
    #[serde(rename = "R_bpp")]
    pub rate_bpp: f64,
    pub psnr: f64,
    pub roi_psnr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: u8,
    /// Batch-mean loss of every step.
    pub step_losses: Vec<f64>,
    pub records: Vec<MetricsRecord>,
    /// Digest of the parameters the stage must not touch, before and after.
    pub frozen_digest_before: [u8; 32],
    pub frozen_digest_after: [u8; 32],
}

impl StageReport {
    /// Mean loss over consecutive windows of `window` steps.
    pub fn windowed_losses(&self, window: usize) -> Vec<f64> {
        self.step_losses
            .chunks(window.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

struct Sample {
    image: ImagePlane,
    mask: Option<RoiMask>,
}

fn random_crop<R: Rng>(
    image: &ImagePlane,
    roi: Option<&BinaryMask>,
    crop: Option<usize>,
    rng: &mut R,
) -> Result<(usize, usize, usize, usize)> {
    let (h, w) = (image.height(), image.width());
    let Some(c) = crop else { return Ok((0, 0, h, w)) };
    if c > h || c > w {
        return Err(Error::InvalidInput(format!("crop {c} exceeds image {h}x{w}")));
    }
    // Anchor the window on a random ROI pixel so most crops contain the ROI.
    let inside: Vec<usize> = roi
        .map(|m| m.data().iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).collect())
        .unwrap_or_default();
    let pick = |rng: &mut R, p: Option<usize>, size: usize| match p {
        Some(p) => rng.gen_range(p.saturating_sub(c - 1).min(size - c)..=p.min(size - c)),
        None => rng.gen_range(0..=size - c),
    };
    let anchor = (!inside.is_empty()).then(|| inside[rng.gen_range(0..inside.len())]);
    let top = pick(rng, anchor.map(|i| i / w), h);
    let left = pick(rng, anchor.map(|i| i % w), w);
    Ok((top, left, c, c))
}

fn draw_sample<R: Rng>(plan: &TrainingPlan, data: TrainingData<'_>, rng: &mut R) -> Result<Sample> {
    match data {
        TrainingData::Unlabeled(ds) => Ok(Sample {
            image: ds.sample_crop(rng),
            mask: None,
        }),
        TrainingData::Annotated(ds) => {
            let ex = sample_training_example(ds, &plan.sigma_values, rng)?;
            let rec = &ds.records[ex.record];
            let gt = ex.category.as_ref().map(|c| &rec.masks[c]);
            let (top, left, ch, cw) = random_crop(&rec.image, gt, plan.crop, rng)?;
            let image = rec.image.crop_at(top, left, ch, cw)?;
            if plan.stage == 1 {
                return Ok(Sample { image, mask: None });
            }
            let mask = match gt {
                Some(gt) => {
                    let p = binary_similarity(&gt.crop_at(top, left, ch, cw)?, ch / 2, cw / 2);
                    adjustable_binarization(&p, BinarizationConfig::new(TRAINING_ETA, ex.sigma)?)
                }
                None => RoiMask::full(ch / 2, cw / 2),
            };
            Ok(Sample {
                image,
                mask: Some(mask),
            })
        }
    }
}

fn check_prerequisites(model: &RoiCodec, plan: &TrainingPlan, data: TrainingData<'_>) -> Result<()> {
    validate_stage(plan.stage)?;
    if plan.steps == 0 || plan.batch_size == 0 {
        return Err(Error::InvalidInput("steps and batch size must be positive".into()));
    }
    if let Some(idx) = plan.lambda_index {
        if idx != model.config().lambda_index {
            return Err(Error::ConfigMismatch(format!(
                "plan λ index {idx} but model λ index {}",
                model.config().lambda_index
            )));
        }
    }
    if plan.stage > 1 && model.trained_stage() < plan.stage - 1 {
        return Err(Error::MissingPrerequisite(format!(
            "stage {} needs a stage-{} checkpoint; model has completed stage {}",
            plan.stage,
            plan.stage - 1,
            model.trained_stage()
        )));
    }
    if plan.stage > 1 && !matches!(data, TrainingData::Annotated(_)) {
        return Err(Error::MissingPrerequisite(format!(
            "stage {} needs annotated data",
            plan.stage
        )));
    }
    Ok(())
}

/// Runs one training stage in place. Metrics are written as NDJSON to `log`
/// every `plan.log_every` steps and after the last step.
pub fn run_stage(
    model: &mut RoiCodec,
    plan: &TrainingPlan,
    data: TrainingData<'_>,
    mut log: Option<&mut dyn Write>,
) -> Result<StageReport> {
    check_prerequisites(model, plan, data)?;
    let lambda = model.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);

    let trainable: Vec<bool> = model.store().entries().iter().map(|e| plan.trains(&e.name)).collect();
    let frozen_digest_before = parameter_digest(model.store(), |n| !plan.trains(n));
    let mut adam = Adam::new(plan.adam, model.store());
    let mut step_losses = Vec::with_capacity(plan.steps);
    let mut records = Vec::new();

    for step in 0..plan.steps {
        let samples = (0..plan.batch_size)
            .map(|_| draw_sample(plan, data, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut grads = Gradients::zeros_like(model.store());
        let (mut loss_sum, mut d_sum, mut r_sum, mut psnr_sum) = (0.0, 0.0, 0.0, 0.0);
        let (mut roi_sum, mut roi_n) = (0.0, 0usize);
        {
            let frozen = |id: ParamId| !trainable[id.0];
            for s in &samples {
                let mut g = Graph::with_frozen(model.store(), &frozen);
                let x = s.image.to_tensor();
                let out = model
                    .network()
                    .forward_train(&mut g, &x, s.mask.as_ref(), lambda, &mut rng)?;
                let loss = g.value(out.loss).data()[0] as f64;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("stage {} step {step} loss", plan.stage)));
                }
                loss_sum += loss;
                d_sum += g.value(out.distortion).data()[0] as f64;
                r_sum += g.value(out.rate_bpp).data()[0] as f64;
                let x_hat = ImagePlane::from_tensor(&g.value(out.x_hat).map(|v| v.clamp(0.0, 1.0)))?;
                psnr_sum += psnr(&s.image, &x_hat)?.min(100.0);
                if let Some(m) = &s.mask {
                    let roi = roi_indicator(m, x_hat.height(), x_hat.width());
                    if roi.count() > 0 {
                        roi_sum += roi_psnr(&s.image, &x_hat, &roi)?.min(100.0);
                        roi_n += 1;
                    }
                }
                grads.accumulate(&g.backward(out.loss));
            }
        }
        let n = plan.batch_size as f64;
        grads.scale(1.0 / plan.batch_size as f32);
        adam.step(model.store_mut(), &grads, |id| trainable[id.0]);
        step_losses.push(loss_sum / n);

        if step % plan.log_every.max(1) == 0 || step + 1 == plan.steps {
            let rec = MetricsRecord {
                step,
                stage: plan.stage,
                loss: loss_sum / n,
                distortion: d_sum / n,
                rate_bpp: r_sum / n,
                psnr: psnr_sum / n,
                roi_psnr: (roi_n > 0).then(|| roi_sum / roi_n as f64),
            };
            if let Some(w) = log.as_deref_mut() {
                serde_json::to_writer(&mut *w, &rec)?;
                w.write_all(b"\n")?;
            }
            records.push(rec);
        }
    }

    model.set_trained_stage(plan.stage);
    Ok(StageReport {
        stage: plan.stage,
        step_losses,
        records,
        frozen_digest_before,
        frozen_digest_after: parameter_digest(model.store(), |n| !plan.trains(n)),
    })
}
