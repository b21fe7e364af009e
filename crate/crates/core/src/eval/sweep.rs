//! Ablation sweeps producing RD-point tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::config::ConfigId;
use crate::data::AnnotatedDataset;
use crate::error::{Error, Result};
use crate::eval::evaluate::{evaluate_record, EvalSettings, ImageEval};
use crate::lma::{Fusion, MaskPrior};
use crate::model::ModelOptions;
use crate::registry::{ModelKey, ModelRegistry};

pub const ETA_GRID: [f64; 5] = [0.95, 0.9, 0.85, 0.8, 0.75];
pub const SIGMA_GRID: [f64; 4] = [0.01, 0.1, 0.3, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Eta,
    Sigma,
    Lambda,
    Fusion,
    Ig,
    Mr,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eta" => Ok(Self::Eta),
            "sigma" => Ok(Self::Sigma),
            "lambda" => Ok(Self::Lambda),
            "fusion" => Ok(Self::Fusion),
            "ig" => Ok(Self::Ig),
            "mr" => Ok(Self::Mr),
            other => Err(Error::InvalidInput(format!("unknown sweep kind {other:?}"))),
        }
    }
}

impl SweepKind {
    /// The grid used when none is given; empty for the architecture sweeps.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Self::Eta => ETA_GRID.to_vec(),
            Self::Sigma => SIGMA_GRID.to_vec(),
            Self::Lambda => (0..5).map(f64::from).collect(),
            _ => Vec::new(),
        }
    }
}

/// One dataset-level or per-image point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub image_id: String,
    pub lambda_index: u8,
    pub eta: f64,
    pub sigma: f64,
    pub bpp: f64,
    pub psnr: f64,
    pub roi_psnr: Option<f64>,
    pub non_roi_psnr: Option<f64>,
    /// Checkpoint file the point was produced with.
    pub model: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    /// One aggregate row per grid value.
    pub points: Vec<RdPoint>,
    pub per_image: Vec<RdPoint>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    image_id: &'a str,
    lambda_index: u8,
    eta: f64,
    sigma: f64,
    bpp: f64,
    psnr: f64,
    roi_psnr: Option<f64>,
}

fn write_csv(points: &[RdPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(CsvRow {
            image_id: &p.image_id,
            lambda_index: p.lambda_index,
            eta: p.eta,
            sigma: p.sigma,
            bpp: p.bpp,
            psnr: p.psnr,
            roi_psnr: p.roi_psnr,
        })
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

impl SweepTable {
    /// Aggregate rows as CSV (`image_id, lambda_index, eta, sigma, bpp, psnr, roi_psnr`).
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        write_csv(&self.points)
    }

    pub fn per_image_csv(&self) -> Result<Vec<u8>> {
        write_csv(&self.per_image)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `results.csv`, `results.json` and `per_image.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("results.json"), self.to_json()?)?;
        std::fs::write(dir.join("per_image.csv"), self.per_image_csv()?)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// η, σ or λ-index values; ignored by the architecture sweeps.
    pub grid: Vec<f64>,
    pub config_id: ConfigId,
    pub lambda_index: u8,
    /// Settings shared by every cell; the swept field is overwritten.
    pub base: EvalSettings,
}

impl SweepSpec {
    pub fn new(kind: SweepKind) -> Self {
        Self {
            kind,
            grid: kind.default_grid(),
            config_id: ConfigId::Desk,
            lambda_index: 1,
            base: EvalSettings::default(),
        }
    }
}

struct Cell {
    label: String,
    key: ModelKey,
    settings: EvalSettings,
}

fn cells(spec: &SweepSpec) -> Result<Vec<Cell>> {
    let full = ModelOptions::full();
    let key = |lambda_index: u8, options| ModelKey::new(spec.config_id, lambda_index, options);
    let with = |f: &dyn Fn(&mut EvalSettings)| {
        let mut s = spec.base.clone();
        f(&mut s);
        s
    };
    let grid_cell = |v: f64| -> Result<Cell> {
        Ok(match spec.kind {
            SweepKind::Eta => Cell {
                label: format!("eta_{v}"),
                key: key(spec.lambda_index, full),
                settings: with(&|s| s.eta = v as f32),
            },
            SweepKind::Sigma => Cell {
                label: format!("sigma_{v}"),
                key: key(spec.lambda_index, full),
                settings: with(&|s| s.sigma = v as f32),
            },
            _ => {
                if v.fract() != 0.0 || !(0.0..5.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("λ index {v} outside 0..=4")));
                }
                Cell {
                    label: format!("lambda_{v}"),
                    key: key(v as u8, full),
                    settings: spec.base.clone(),
                }
            }
        })
    };
    let variant = |label: &str, options: ModelOptions| Cell {
        label: label.to_string(),
        key: key(spec.lambda_index, options),
        settings: spec.base.clone(),
    };
    match spec.kind {
        SweepKind::Eta | SweepKind::Sigma | SweepKind::Lambda => {
            if spec.grid.is_empty() {
                return Err(Error::InvalidInput("empty sweep grid".into()));
            }
            spec.grid.iter().map(|&v| grid_cell(v)).collect()
        }
        SweepKind::Fusion => Ok([Fusion::AddMul, Fusion::MulMul, Fusion::AddAdd]
            .into_iter()
            .map(|f| variant(&f.to_string(), ModelOptions { fusion: f, ..full }))
            .collect()),
        SweepKind::Ig => Ok(vec![
            variant("w/ IG", full),
            variant("w/o IG", ModelOptions { use_ig: false, ..full }),
        ]),
        SweepKind::Mr => Ok(vec![
            variant("MR", full),
            variant(
                "interpolation",
                ModelOptions {
                    mask_prior: MaskPrior::Interpolated,
                    ..full
                },
            ),
        ]),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Evaluates every grid cell over `dataset`. Every required model is
/// resolved first, so a missing or untrained model fails before any work.
/// With `export`, reconstructions are written to `export/<cell>/<image>.png`.
/// The f64 with the same shortest decimal form, so 0.85f32 reports as 0.85.
fn widen(v: f32) -> f64 {
    v.to_string().parse().unwrap_or(v as f64)
}

pub fn run_sweep(
    spec: &SweepSpec,
    dataset: &AnnotatedDataset,
    registry: &ModelRegistry,
    export: Option<&Path>,
) -> Result<SweepTable> {
    if dataset.is_empty() {
        return Err(Error::Dataset("sweep dataset is empty".into()));
    }
    let cells = cells(spec)?;
    let models = cells.iter().map(|c| registry.get(&c.key)).collect::<Result<Vec<_>>>()?;
    let tag = |label: &str, id: &str| match spec.kind {
        SweepKind::Fusion | SweepKind::Ig | SweepKind::Mr => format!("{id}@{label}"),
        _ => id.to_string(),
    };

    let mut points = Vec::new();
    let mut per_image = Vec::new();
    for (cell, model) in cells.iter().zip(&models) {
        let file = cell.key.file_name()?;
        let point = |e: &ImageEval| RdPoint {
            image_id: tag(&cell.label, &e.image_id),
            lambda_index: cell.key.lambda_index,
            eta: widen(cell.settings.eta),
            sigma: widen(cell.settings.sigma),
            bpp: e.bpp,
            psnr: e.psnr,
            roi_psnr: e.roi_psnr,
            non_roi_psnr: e.non_roi_psnr,
            model: file.clone(),
        };
        let mut evals = Vec::with_capacity(dataset.len());
        for rec in &dataset.records {
            let e = evaluate_record(model, rec, &cell.settings)?;
            if let Some(dir) = export {
                let sub = dir.join(cell.label.replace('/', "-").replace(' ', "_"));
                std::fs::create_dir_all(&sub)?;
                e.reconstruction.save_png(sub.join(format!("{}.png", e.image_id)))?;
            }
            per_image.push(point(&e));
            evals.push(e);
        }
        points.push(RdPoint {
            image_id: tag(&cell.label, "mean"),
            bpp: mean(evals.iter().map(|e| e.bpp)).unwrap_or(0.0),
            psnr: mean(evals.iter().map(|e| e.psnr)).unwrap_or(0.0),
            roi_psnr: mean(evals.iter().filter_map(|e| e.roi_psnr)),
            non_roi_psnr: mean(evals.iter().filter_map(|e| e.non_roi_psnr)),
            ..point(&evals[0])
        });
    }
    Ok(SweepTable {
        kind: spec.kind,
        points,
        per_image,
    })
}
