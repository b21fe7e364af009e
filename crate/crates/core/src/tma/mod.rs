//! Text-controlled mask acquisition: prompt-driven similarity maps and their
//! binarization into two-valued ROI masks.

pub mod backend;
pub mod io;
pub mod maps;

pub use backend::{
    similarity_multi, BackendKind, EmbeddingModel, GroundTruthBackend, PretrainedBackend, SimilarityBackend,
    SyntheticBackend, SyntheticRule, TextPrompt,
};
pub use maps::{
    adjustable_binarization, mask_iou, mask_iou_full_resolution, resize_bilinear, upsample_mask, BinarizationConfig,
    BinaryMask, RoiMask, SimilarityMap,
};
