//! Configured sweeps, record I/O and the analysis pipeline.

pub mod config;
pub mod pipeline;
pub mod records;
pub mod svg;
pub mod sweep;

pub use config::{ConfigLayer, ExperimentConfig, Filling, GridSpec, OutputFormat};
pub use pipeline::{
    analyse, analyse_stages, run_pipeline, AnalysisOptions, EtaReport, PipelineReport, Stages,
};
pub use sweep::{run_sweep, run_sweep_to_disk, SweepOutcome};
