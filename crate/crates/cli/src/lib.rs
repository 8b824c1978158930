//! Pipeline driver: configuration, stages over a run directory, and reports.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{Mode, PipelineConfig};
pub use pipeline::{Manifest, Pipeline, Stage};
