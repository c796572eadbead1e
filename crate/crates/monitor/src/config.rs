use std::path::{Path, PathBuf};

use novelty_core::detectors::{Detector, DetectorKind, Threshold, DEFAULT_MIN_PROBABILITY};
use novelty_core::nn::load_checkpoint;
use serde::{Deserialize, Serialize};

use crate::MonitorError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transport {
    /// JSON lines on stdin/stdout.
    Stdio,
    /// JSON lines over TCP.
    Tcp { addr: String },
    /// `POST /detect` and `GET /health` over HTTP.
    Http { addr: String },
}

fn default_min_probability() -> f64 {
    DEFAULT_MIN_PROBABILITY
}

/// Everything the monitor needs at startup. Loadable from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub detector: DetectorKind,
    #[serde(default)]
    pub autoencoder: Option<PathBuf>,
    #[serde(default)]
    pub classifier: Option<PathBuf>,
    #[serde(default)]
    pub threshold: Option<Threshold>,
    #[serde(default = "default_min_probability")]
    pub min_probability: f64,
    pub sink: PathBuf,
    pub transport: Transport,
}

impl MonitorConfig {
    pub fn from_file(path: &Path) -> Result<Self, MonitorError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MonitorError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| MonitorError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks that the models and settings the detector kind needs are present.
    pub fn validate(&self) -> Result<(), MonitorError> {
        let missing = |what: &str| Err(MonitorError::Config(format!("{} detector needs {what}", self.detector)));
        match self.detector {
            DetectorKind::Naive | DetectorKind::SemiSemantic => {
                if self.autoencoder.is_none() {
                    return missing("an autoencoder checkpoint");
                }
                if self.threshold.is_none() {
                    return missing("a threshold");
                }
            }
            DetectorKind::ClassifierConfidence => {
                if self.classifier.is_none() {
                    return missing("a classifier checkpoint");
                }
            }
            DetectorKind::FullySemantic => {
                if self.classifier.is_none() {
                    return missing("a classifier checkpoint");
                }
                if self.autoencoder.is_none() {
                    return missing("an autoencoder checkpoint");
                }
            }
        }
        if !(self.min_probability > 0.0 && self.min_probability < 1.0) {
            return Err(MonitorError::Config(format!(
                "min_probability {} not in (0, 1)",
                self.min_probability
            )));
        }
        Ok(())
    }

    /// Validates, loads the checkpoints and builds the detector.
    pub fn load_detector(&self) -> Result<Detector, MonitorError> {
        self.validate()?;
        let load = |p: &Option<PathBuf>| -> Result<_, MonitorError> {
            let path = p.as_ref().expect("validated");
            load_checkpoint(path)
                .map(|c| c.network)
                .map_err(|source| MonitorError::Checkpoint {
                    path: path.clone(),
                    source,
                })
        };
        let detector = match self.detector {
            kind @ (DetectorKind::Naive | DetectorKind::SemiSemantic) => {
                Detector::reconstruction(kind, load(&self.autoencoder)?, self.threshold.expect("validated"))?
            }
            DetectorKind::ClassifierConfidence => {
                Detector::classifier_confidence(load(&self.classifier)?, self.min_probability)?
            }
            DetectorKind::FullySemantic => {
                Detector::fully_semantic(load(&self.classifier)?, load(&self.autoencoder)?, self.min_probability)?
            }
        };
        Ok(detector)
    }
}
