//! Configuration, end-to-end pipeline and experiment families.

pub mod config;
pub mod experiment;
pub mod pipeline;

pub use config::{load_config, AccessScheme, AllocationScheme, ClusteringScheme, ConfigError, ScenarioConfig};
pub use experiment::{
    run_experiment, summary_path, write_csv, ExperimentError, ExperimentId, ExperimentResult, Metric, Row, SummaryRow,
};
pub use pipeline::{run_pipeline, stage_seed, Metrics, PipelineError, PipelineOutput, Scenario};
