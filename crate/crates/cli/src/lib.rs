//! Configuration and pipeline behind the `guillemin` binary.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{parse_config, ConfigError, Mode, RunConfig};
pub use pipeline::{run_pipeline, PipelineError, RunReport, Stage};
