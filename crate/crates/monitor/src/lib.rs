//! Runtime novelty monitor.
//!
//! Scores incoming images with a configured detector, answers with the
//! verdict and its evidence, and appends every novel input to a checksummed
//! record log for later retraining. Requests arrive as JSON lines over stdio
//! or TCP, or as JSON bodies over HTTP.

mod config;
mod server;
mod service;
pub mod sink;

use std::path::PathBuf;

use novelty_core::detectors::DetectorError;
use novelty_core::nn::NnError;
use thiserror::Error;

pub use config::{MonitorConfig, Transport};
pub use server::{router, Server};
pub use service::Monitor;
pub use sink::{read_records, NoveltyRecord, RecordLog, RecordSink, SinkError};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("invalid monitor config: {0}")]
    Config(String),
    #[error("cannot load checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: NnError },
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binds according to `config` and serves until `shutdown` resolves.
pub async fn serve(
    config: &MonitorConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), MonitorError> {
    Server::bind(config).await?.run(shutdown).await
}
