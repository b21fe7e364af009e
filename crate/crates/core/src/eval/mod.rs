//! Metrics and experiment runners.

pub mod evaluate;
pub mod metrics;
pub mod sweep;

pub use evaluate::{evaluate_record, EvalSettings, ImageEval, RoiSource};
pub use metrics::{bpp, mse, non_roi_psnr, psnr, roi_indicator, roi_psnr};
pub use sweep::{run_sweep, RdPoint, SweepKind, SweepSpec, SweepTable, ETA_GRID, SIGMA_GRID};
