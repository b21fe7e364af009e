//! Dataset preparation: unlabeled crops for codec pre-training and
//! annotation-backed masks for the ROI stages and evaluation.

pub mod coco;
pub mod synthetic;
pub mod unlabeled;

pub use coco::{load_annotated, AnnotatedDataset, AnnotatedRecord, ANNOTATED_SIZE};
pub use synthetic::{bundled_synthetic, synthetic_annotated, synthetic_scene, write_synthetic_coco, CATEGORIES};
pub use unlabeled::{load_unlabeled, UnlabeledDataset};
