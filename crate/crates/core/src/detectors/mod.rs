//! Novelty detectors, threshold calibration and batch evaluation.

mod detector;
mod evaluate;
mod threshold;

use thiserror::Error;

use crate::nn::NnError;

pub use detector::{
    classify_with_confidence, decide, fully_semantic_detect, naive_detect, reconstruct, reconstruction_score,
    reconstruction_scores, ClassDecision, Detector, DetectorKind, Evidence, NoveltyVerdict, Verdict,
    DEFAULT_MIN_PROBABILITY,
};
pub use evaluate::{evaluate_detector, EvalSet, Evaluation, Histogram, ResultRow, ResultTable, HISTOGRAM_BINS};
pub use threshold::{calibrate_threshold, Comparison, Threshold, DEFAULT_PERCENTILE};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("cannot calibrate on an empty error sample")]
    EmptySample,
    #[error("percentile {0} not in (0, 100]")]
    Percentile(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("classifier output sums to {0}, not a probability vector")]
    NotProbability(f64),
    #[error("{kind} detector needs {what}")]
    MissingModel { kind: DetectorKind, what: &'static str },
    #[error("{0}")]
    Model(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
