//! Mask-guided pseudo-label refinement and prototype alignment for
//! unsupervised domain adaptation in semantic segmentation.
//!
//! The pipeline runs per image: superpixels seed point prompts, externally
//! produced masks are filtered into a disjoint ID map, and the map turns a
//! teacher probability map into refined pseudo-labels. Prototypes built from
//! the labels drive a contrastive alignment loss.

pub mod error;
pub mod label;
pub mod manifest;
pub mod masks;
pub mod metrics;
pub mod probmap;
pub mod proto;
pub mod pseudo_label;
pub mod rle;
pub mod superpixel;
pub mod tensor;

pub use error::{Error, Result};
pub use label::{LabelMap, MaskIdMap, IGNORE_LABEL};
pub use manifest::{InputKind, Manifest, ManifestRecord};
pub use masks::{
    build_mask_id_map, coverage_stats, overlap_filter, CoverageStats, FilteredMaskSet,
};
pub use metrics::{confusion, iou_report, ConfusionMatrix, IoUReport};
pub use probmap::{validate_probmap, ProbMap};
pub use proto::{AlignConfig, PrototypeAccumulator, PrototypeBank};
pub use pseudo_label::{refine, Provenance, RefineParams, RefinedLabels};
pub use rle::{decode_rle, encode_rle, BinaryMask, MaskSet};
pub use superpixel::{seeds_partition, PointPromptSet, SeedsParams, SuperpixelMap};
pub use tensor::{load_tensor, save_tensor, DenseTensor, Dtype, TensorData};
