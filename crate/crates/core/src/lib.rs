//! Core of the novelty-detection toolkit.
//!
//! * [`nn`]: a small deterministic neural-network engine (dense, conv, pooling,
//!   batchnorm, dropout) with SGD/Adam training and binary checkpoints.
//! * [`dataset`]: MNIST IDX parsing, letter-image directories and seeded
//!   experiment splits.
//! * [`topology`]: the semantic topology rules for autoencoders derived from the
//!   number of known classes.
//! * [`detectors`]: naive, semi-semantic, classifier-confidence and
//!   fully-semantic novelty detectors with threshold calibration and batch
//!   evaluation.

pub mod dataset;
pub mod detectors;
pub mod nn;
pub mod topology;
