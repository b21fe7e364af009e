//! The `croi` command line: mask preview, compression, decompression,
//! training, sweeps and the HTTP service.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::codec::config::{CodecConfig, ConfigId};
use crate::data::{bundled_synthetic, load_annotated, load_unlabeled, AnnotatedDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::eval::{run_sweep, RoiSource, SweepKind, SweepSpec};
use crate::image::ImagePlane;
use crate::lma::{Fusion, MaskPrior};
use crate::model::{model_file_name, ModelOptions, RoiCodec};
use crate::registry::{ModelKey, ModelRegistry};
use crate::service::pipeline::{self, Backends, MaskRequest};
use crate::service::{FileConfig, ServiceConfig, Session, MODEL_DIR_ENV};
use crate::tma::{mask_iou, mask_iou_full_resolution, BackendKind, BinaryMask};
use crate::train::{run_stage, TrainingData, TrainingPlan, DEFAULT_STEPS};

/// Process exit codes beyond 0 (success), 1 (other failure) and 2 (usage).
pub const EXIT_BACKEND_UNAVAILABLE: u8 = 3;
pub const EXIT_MISSING_MODEL: u8 = 4;
pub const EXIT_CORRUPT_CONTAINER: u8 = 5;
pub const EXIT_CONFIG_MISMATCH: u8 = 6;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BackendUnavailable(_) => EXIT_BACKEND_UNAVAILABLE,
        Error::MissingModel(_) => EXIT_MISSING_MODEL,
        Error::CorruptStream(_) => EXIT_CORRUPT_CONTAINER,
        Error::ConfigMismatch(_) => EXIT_CONFIG_MISMATCH,
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "croi", version, about = "Text-driven ROI image compression")]
pub struct Cli {
    /// TOML settings file (defaults to ./croi.toml when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preview the ROI mask for a prompt.
    Mask(MaskArgs),
    /// Encode an image into a .croi container.
    Compress(CompressArgs),
    /// Decode a .croi container to PNG.
    Decompress(DecompressArgs),
    /// Run one training stage.
    Train(TrainArgs),
    /// Run an ablation sweep and write CSV/JSON tables.
    Sweep(SweepArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Write the bundled synthetic annotated set as PNGs and a COCO manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// pretrained, ground-truth or synthetic.
    #[arg(long)]
    pub backend: Option<BackendKind>,
    /// Embedding weights (JSON) for the pretrained backend.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// COCO manifest whose masks feed the ground-truth backend; the image
    /// is matched by file name.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MaskOptions {
    #[arg(long, default_value = "Foreground")]
    pub text: String,
    #[arg(long, default_value_t = 0.85)]
    pub eta: f32,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f32,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub mask: MaskOptions,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Mask PNG; a JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Binary ground-truth PNG; adds `iou` to the sidecar.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Compare against the ground truth at image resolution instead of mask
    /// resolution.
    #[arg(long, requires = "gt")]
    pub iou_full_resolution: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Directory of trained checkpoints (overrides the environment and file).
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub lambda_index: u8,
    /// desk, narrow or wide.
    #[arg(long = "model-config", default_value = "desk")]
    pub model_config: ConfigId,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    pub image: PathBuf,
    #[command(flatten)]
    pub mask: MaskOptions,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecompressArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Ignored; decoding never needs the prompt.
    #[arg(long)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VariantArgs {
    /// A+M, M+M or A+A.
    #[arg(long, default_value = "A+M")]
    pub fusion: Fusion,
    /// Disable the importance generator.
    #[arg(long)]
    pub no_ig: bool,
    /// Use an interpolated mask instead of the learned representation.
    #[arg(long)]
    pub interpolated_mask: bool,
}

impl VariantArgs {
    fn options(&self) -> ModelOptions {
        ModelOptions {
            fusion: self.fusion,
            use_ig: !self.no_ig,
            mask_prior: if self.interpolated_mask {
                MaskPrior::Interpolated
            } else {
                MaskPrior::Learned
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// COCO-style manifest of annotated images.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the bundled synthetic annotated set.
    #[arg(long, conflicts_with = "data")]
    pub synthetic: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Option<AnnotatedDataset>> {
        match (&self.data, self.synthetic) {
            (Some(p), _) => load_annotated(p).map(Some),
            (None, true) => Ok(Some(bundled_synthetic())),
            (None, false) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub stage: u8,
    /// Defaults to 50000, 10000 and 20000 for stages 1 to 3.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub variant: VariantArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory of unlabeled images for stage 1.
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    /// Square training crop; stage 1 defaults to 256, later stages to whole images.
    #[arg(long)]
    pub crop: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// NDJSON metrics log (stderr when omitted).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// eta, sigma, lambda, fusion, ig or mr.
    #[arg(long)]
    pub kind: SweepKind,
    /// Comma-separated grid; the standard grid for the kind when omitted.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.85)]
    pub eta: f32,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f32,
    /// ROI category; the union of all annotations when omitted.
    #[arg(long)]
    pub category: Option<String>,
    /// gt or mask.
    #[arg(long, default_value = "gt")]
    pub roi_source: RoiSource,
    /// Directory for results.csv, results.json and per_image.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every reconstruction as `<export>/<cell>/<image>.png`.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::data::synthetic::BUNDLED_SIZE)]
    pub count: usize,
    #[arg(long, default_value_t = crate::data::synthetic::BUNDLED_SEED)]
    pub seed: u64,
}

fn file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None if Path::new("croi.toml").is_file() => FileConfig::load("croi.toml"),
        None => Ok(FileConfig::default()),
    }
}

fn settings(
    file: &FileConfig,
    model_dir: Option<PathBuf>,
    port: Option<u16>,
    backend: Option<BackendKind>,
    weights: Option<PathBuf>,
) -> Result<ServiceConfig> {
    let env_dir = std::env::var_os(MODEL_DIR_ENV).map(PathBuf::from);
    ServiceConfig::resolve(model_dir, env_dir, port, backend, weights, file)
}

fn backends_for(cfg: &ServiceConfig, image: &ImagePlane, image_path: &Path, annotations: Option<&Path>) -> Result<Backends> {
    let backends = Backends::new(cfg.embedding_weights.clone());
    if let Some(manifest) = annotations {
        let ds = load_annotated(manifest)?;
        let name = image_path.file_name().map(|n| n.to_string_lossy().into_owned());
        let rec = ds
            .records
            .iter()
            .find(|r| Some(&r.file_name) == name.as_ref() || Path::new(&r.file_name).file_name() == image_path.file_name());
        match rec {
            Some(rec) => {
                for (cat, mask) in &rec.masks {
                    let full = mask.resize_nearest(image.height(), image.width());
                    backends.ground_truth().register(image, cat, full)?;
                }
            }
            None => log::warn!("{} is not listed in {}", image_path.display(), manifest.display()),
        }
    }
    Ok(backends)
}

fn mask_request(opts: &MaskOptions, cfg: &ServiceConfig) -> MaskRequest {
    MaskRequest {
        text: opts.text.clone(),
        eta: opts.eta,
        sigma: opts.sigma,
        backend: cfg.backend,
    }
}

fn registry(cfg: &ServiceConfig) -> ModelRegistry {
    ModelRegistry::new(cfg.model_dir.clone())
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string(v).expect("JSON values serialize"));
}

fn cmd_mask(a: MaskArgs, file: &FileConfig) -> Result<()> {
    let cfg = settings(file, None, None, a.backend.backend, a.backend.weights.clone())?;
    let image = ImagePlane::load(&a.image)?;
    let backends = backends_for(&cfg, &image, &a.image, a.backend.annotations.as_deref())?;
    let req = mask_request(&a.mask, &cfg);
    let r = pipeline::make_mask(&backends, &image, &req)?;
    std::fs::write(&a.out, r.mask.to_png()?)?;
    let mut sidecar = json!({
        "text": req.text,
        "eta": req.eta,
        "sigma": req.sigma,
        "backend": req.backend,
        "roi_pixel_fraction": r.roi_pixel_fraction(),
    });
    if let Some(gt) = &a.gt {
        let gt = ImagePlane::load(gt)?;
        let gt = BinaryMask::from_fn(gt.height(), gt.width(), |h, w| gt.get(h, w, 0) > 0.5);
        sidecar["iou"] = json!(if a.iou_full_resolution {
            mask_iou_full_resolution(&r.mask, &gt)
        } else {
            mask_iou(&r.mask, &gt)
        });
    }
    std::fs::write(a.out.with_extension("json"), serde_json::to_vec_pretty(&sidecar)?)?;
    print_json(&sidecar);
    Ok(())
}

fn cmd_compress(a: CompressArgs, file: &FileConfig) -> Result<()> {
    let cfg = settings(file, a.model.model_dir.clone(), None, a.backend.backend, a.backend.weights.clone())?;
    let image = ImagePlane::load(&a.image)?;
    let backends = backends_for(&cfg, &image, &a.image, a.backend.annotations.as_deref())?;
    let key = ModelKey::new(a.model.model_config, a.model.lambda_index, ModelOptions::full());
    let model = registry(&cfg).get(&key)?;
    let r = pipeline::compress(&backends, &model, &image, &mask_request(&a.mask, &cfg))?;
    std::fs::write(&a.out, &r.bytes)?;
    print_json(&json!({
        "out": a.out,
        "bytes": r.bytes.len(),
        "bpp": r.metrics.bpp,
        "psnr": r.metrics.psnr,
        "roi_psnr": r.metrics.roi_psnr,
        "model": key.file_name()?,
    }));
    Ok(())
}

fn cmd_decompress(a: DecompressArgs, file: &FileConfig) -> Result<()> {
    if a.text.is_some() {
        eprintln!("warning: --text is ignored; decoding does not use a mask");
    }
    let cfg = settings(file, a.model_dir.clone(), None, None, None)?;
    let bytes = std::fs::read(&a.input)?;
    let header = crate::codec::Bitstream::from_bytes(&bytes)?;
    let key = ModelKey::new(header.config_id, header.lambda_index, ModelOptions::full());
    let model = registry(&cfg).get(&key)?;
    let (_, image) = pipeline::decompress(&model, &bytes)?;
    image.save_png(&a.out)?;
    print_json(&json!({"out": a.out, "height": image.height(), "width": image.width()}));
    Ok(())
}

fn cmd_train(a: TrainArgs, file: &FileConfig) -> Result<()> {
    let cfg = settings(file, a.model.model_dir.clone(), None, None, None)?;
    let dir = cfg
        .model_dir
        .clone()
        .ok_or_else(|| Error::InvalidInput(format!("set --model-dir or {MODEL_DIR_ENV}")))?;
    std::fs::create_dir_all(&dir)?;
    let config = CodecConfig::new(a.model.model_config, a.model.lambda_index)?;
    let options = a.variant.options();
    let path = dir.join(model_file_name(&config, options));
    let mut model = if a.stage == 1 {
        RoiCodec::new(config, options, a.seed)
    } else if path.is_file() {
        RoiCodec::load(&path)?
    } else {
        return Err(Error::MissingPrerequisite(format!(
            "stage {} needs the stage-{} checkpoint {}",
            a.stage,
            a.stage - 1,
            path.display()
        )));
    };

    let annotated = a.data.load()?;
    let unlabeled: Option<UnlabeledDataset> = match (&a.unlabeled, &annotated) {
        (Some(root), _) if a.stage == 1 => Some(load_unlabeled(root, a.crop.unwrap_or(256), a.seed)?),
        _ => None,
    };
    let data = match (&unlabeled, &annotated) {
        (Some(u), _) => TrainingData::Unlabeled(u),
        (None, Some(d)) => TrainingData::Annotated(d),
        (None, None) if a.stage == 1 => {
            return Err(Error::InvalidInput("stage 1 needs --unlabeled, --data or --synthetic".into()))
        }
        (None, None) => {
            return Err(Error::MissingPrerequisite(format!(
                "stage {} needs annotated data (--data or --synthetic)",
                a.stage
            )))
        }
    };

    let mut plan = TrainingPlan::new(a.stage, a.steps.unwrap_or(DEFAULT_STEPS[a.stage as usize - 1]))
        .with_seed(a.seed)
        .with_batch_size(a.batch_size)
        .with_log_every(a.log_every);
    plan.lambda_index = Some(a.model.lambda_index);
    if let (Some(c), TrainingData::Annotated(_)) = (a.crop, data) {
        plan = plan.with_crop(c);
    }
    let report = match &a.metrics {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
            run_stage(&mut model, &plan, data, Some(&mut f))?
        }
        None => run_stage(&mut model, &plan, data, Some(&mut std::io::stderr()))?,
    };
    model.save(&path, json!({"seed": a.seed, "steps": plan.steps}))?;
    print_json(&json!({
        "checkpoint": path,
        "stage": a.stage,
        "steps": plan.steps,
        "final_loss": report.step_losses.last(),
        "frozen_parameters_unchanged": report.frozen_digest_before == report.frozen_digest_after,
    }));
    Ok(())
}

fn cmd_sweep(a: SweepArgs, file: &FileConfig) -> Result<()> {
    let cfg = settings(file, a.model.model_dir.clone(), None, None, None)?;
    let dataset = a
        .data
        .load()?
        .ok_or_else(|| Error::InvalidInput("sweep needs --data or --synthetic".into()))?;
    let mut spec = SweepSpec::new(a.kind);
    if let Some(grid) = a.grid {
        spec.grid = grid;
    }
    spec.config_id = a.model.model_config;
    spec.lambda_index = a.model.lambda_index;
    spec.base.eta = a.eta;
    spec.base.sigma = a.sigma;
    spec.base.category = a.category;
    spec.base.roi_source = a.roi_source;
    let table = run_sweep(&spec, &dataset, &registry(&cfg), a.export.as_deref())?;
    table.write_to(&a.out)?;
    print!("{}", String::from_utf8_lossy(&table.to_csv()?));
    Ok(())
}

fn cmd_serve(a: ServeArgs, file: &FileConfig) -> Result<()> {
    let cfg = settings(file, a.model_dir, a.port, a.backend, a.weights)?;
    let session = Arc::new(Session::new(
        registry(&cfg),
        Backends::new(cfg.embedding_weights.clone()),
        cfg.backend,
    ));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(crate::service::serve(session, cfg.port))?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let ds = crate::data::write_synthetic_coco(&a.out, a.count, a.seed)?;
    print_json(&json!({"out": a.out, "images": ds.len(), "manifest": a.out.join("annotations.json")}));
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let file = file_config(cli.config.as_deref())?;
    match cli.command {
        Command::Mask(a) => cmd_mask(a, &file),
        Command::Compress(a) => cmd_compress(a, &file),
        Command::Decompress(a) => cmd_decompress(a, &file),
        Command::Train(a) => cmd_train(a, &file),
        Command::Sweep(a) => cmd_sweep(a, &file),
        Command::Serve(a) => cmd_serve(a, &file),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Entry point of the `croi` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
