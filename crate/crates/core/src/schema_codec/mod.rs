//! Flow tables, feature schemas, the `[-1, 1]` codec and dataset containers.

mod codebook;
mod dataset;
mod plan;
mod schema;
mod split;
mod table;

pub use codebook::{fit_codebooks, fit_scalers, Codebook, Codec, FeatureTransform, Scaler, OOV_TOKEN};
pub use dataset::{EncodedDataset, Provenance, FSE1_MAGIC};
pub use plan::{build_augmentation_plan, AugmentationPlan, DatasetPreset, PlanEntry, PlanPolicy};
pub use schema::{normalize_label, FeatureSchema, FieldKind, FieldRole, FieldSpec};
pub use split::{
    collapse_binary, collapse_binary_dataset, make_loao_split, shuffle_split, stratified_subsample, ABNORMAL,
    NORMAL,
};
pub use table::{load_flow_table, read_flow_table, RawCell, RawColumn, RawDataset, SplitTag};
