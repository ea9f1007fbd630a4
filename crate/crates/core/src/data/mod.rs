//! Dataset preparation: masks and tiling, coverage labels, feature tables,
//! transforms, splits and toy datasets.

pub mod label;
pub mod mask;
pub mod preprocess;
pub mod split;
pub mod synthetic;
pub mod table;

pub use label::{
    assign_label, gamma, label_by_percentile, percentile_threshold, LabelReport, TileLabel,
};
pub use mask::{
    load_pgm, partition, rasterize_polygon, reassemble, save_pgm, BinaryMask, Grid, Tiling,
};
pub use preprocess::{MinMax, Pipeline, PipelineSpec, ReduceKind, Reducer, Scaled, ZScore};
pub use split::{fold_partition, sample_train_test, stratified_kfold, SplitSpec};
pub use synthetic::{make_synthetic, SyntheticKind};
pub use table::{
    load_feature_csv, read_feature_csv, rebalance, FeatureTable, Label, LabelSource, Stage,
};
