//! Configuration and pipelines behind the `ngnseg` command.

pub mod config;
pub mod pipeline;

pub use config::{KernelChoice, PipelineConfig, SEGMENT_METHODS};
pub use pipeline::{
    benchmark_descriptors, classify_table, extract_table, run_classification_pipeline, run_segmentation_benchmark,
    run_segmentation_pipeline, FeatureTable, PipelineError, Stage, StageResult,
};
