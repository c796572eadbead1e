//! Experiment orchestration for the novelty detectors: profiles, the
//! train/calibrate/evaluate pipeline with checkpoint caching, and reports.

pub mod pipeline;
pub mod profile;
pub mod report;

use std::path::PathBuf;

use novelty_core::dataset::DatasetError;
use novelty_core::detectors::DetectorError;
use novelty_core::nn::NnError;
use novelty_core::topology::TopologyError;
use thiserror::Error;

pub use pipeline::{run_profile, run_profile_on, RunPaths};
pub use profile::{ExperimentProfile, ProfileName};
pub use report::{emit_report, Format, Report};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Profile(String),
    #[error("missing data: {0} (run scripts/fetch_data.sh)")]
    MissingData(PathBuf),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
