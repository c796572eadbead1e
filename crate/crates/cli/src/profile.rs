use std::fmt;
use std::str::FromStr;

use novelty_core::dataset::{ClassPartition, SplitSizes, PIXELS};
use novelty_core::detectors::{DetectorKind, DEFAULT_MIN_PROBABILITY, DEFAULT_PERCENTILE};
use novelty_core::nn::{EarlyStop, OptimizerKind, TrainConfig};
use novelty_core::topology::{validate_topology, LatentRounding, TopologySpec};
use serde::{Deserialize, Serialize};

use crate::PipelineError;

pub const DEFAULT_SEED: u64 = 42;
pub const NAIVE_TOPOLOGY: &str = "784-50-50-50-784";
pub const FIRST_SEMANTIC_TOPOLOGY: &str = "784-50-7-50-784";
pub const BEST_SEMANTIC_TOPOLOGY: &str = "784-512-128-7-128-512-784";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    RichterRepro,
    Naive,
    ClassifierBaseline,
    SemiSemanticFirst,
    SemiSemanticBest,
    FullySemantic,
}

impl ProfileName {
    pub const ALL: [ProfileName; 6] = [
        ProfileName::RichterRepro,
        ProfileName::Naive,
        ProfileName::ClassifierBaseline,
        ProfileName::SemiSemanticFirst,
        ProfileName::SemiSemanticBest,
        ProfileName::FullySemantic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::RichterRepro => "richter-repro",
            ProfileName::Naive => "naive",
            ProfileName::ClassifierBaseline => "classifier-baseline",
            ProfileName::SemiSemanticFirst => "semi-semantic-first",
            ProfileName::SemiSemanticBest => "semi-semantic-best",
            ProfileName::FullySemantic => "fully-semantic",
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| PipelineError::Profile(format!("unknown profile {s:?}")))
    }
}

/// How strictly a profile's autoencoder topology is checked before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleCheck {
    /// No constraint (the naive networks).
    None,
    /// Only the latent-width rule. The first semantic attempt narrows the
    /// middle layer to the class count but keeps the naive depth.
    Latent,
    /// All three rules.
    All,
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentProfile {
    pub name: ProfileName,
    pub seed: u64,
    pub partition: ClassPartition,
    pub sizes: SplitSizes,
    pub detector: DetectorKind,
    #[serde(default)]
    pub topology: Option<TopologySpec>,
    #[serde(default)]
    pub autoencoder_training: Option<TrainConfig>,
    #[serde(default)]
    pub classifier_training: Option<TrainConfig>,
    pub rule_check: RuleCheck,
    #[serde(default)]
    pub latent_rounding: LatentRounding,
    pub percentile: f64,
    pub min_probability: f64,
}

/// Autoencoder budget: batch 1024, learning rate 0.01, Adam, early stopping
/// after 20 flat epochs, at most 300 epochs.
pub fn autoencoder_training(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 1024,
        epochs: 300,
        learning_rate: 0.01,
        optimizer: OptimizerKind::Adam,
        seed,
        early_stop: Some(EarlyStop {
            patience: 20,
            min_delta: 1e-5,
        }),
    }
}

/// The long schedule: 3000 epochs without early stopping.
pub fn faithful_autoencoder_training(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 3000,
        early_stop: None,
        ..autoencoder_training(seed)
    }
}

/// Classifier budget: Adam at 0.001 on mini-batches of 128.
pub fn classifier_training(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 128,
        epochs: CLASSIFIER_EPOCHS,
        learning_rate: 0.001,
        optimizer: OptimizerKind::Adam,
        seed,
        early_stop: Some(EarlyStop {
            patience: 20,
            min_delta: 1e-5,
        }),
    }
}

pub const CLASSIFIER_EPOCHS: usize = 8;

impl ExperimentProfile {
    pub fn builtin(name: ProfileName) -> Self {
        let seed = DEFAULT_SEED;
        let topo = |s: &str| Some(s.parse::<TopologySpec>().expect("built-in topology parses"));
        let base = Self {
            name,
            seed,
            partition: ClassPartition::default_experiment(),
            sizes: SplitSizes::default(),
            detector: DetectorKind::Naive,
            topology: topo(NAIVE_TOPOLOGY),
            autoencoder_training: Some(autoencoder_training(seed)),
            classifier_training: None,
            rule_check: RuleCheck::None,
            latent_rounding: LatentRounding::Ceil,
            percentile: DEFAULT_PERCENTILE,
            min_probability: DEFAULT_MIN_PROBABILITY,
        };
        match name {
            ProfileName::RichterRepro => Self {
                partition: ClassPartition::all_digits(),
                sizes: SplitSizes {
                    eval_unknown: 0,
                    ..SplitSizes::default()
                },
                ..base
            },
            ProfileName::Naive => base,
            ProfileName::ClassifierBaseline => Self {
                detector: DetectorKind::ClassifierConfidence,
                topology: None,
                autoencoder_training: None,
                classifier_training: Some(classifier_training(seed)),
                ..base
            },
            ProfileName::SemiSemanticFirst => Self {
                detector: DetectorKind::SemiSemantic,
                topology: topo(FIRST_SEMANTIC_TOPOLOGY),
                rule_check: RuleCheck::Latent,
                ..base
            },
            ProfileName::SemiSemanticBest => Self {
                detector: DetectorKind::SemiSemantic,
                topology: topo(BEST_SEMANTIC_TOPOLOGY),
                rule_check: RuleCheck::All,
                ..base
            },
            ProfileName::FullySemantic => Self {
                detector: DetectorKind::FullySemantic,
                topology: topo(BEST_SEMANTIC_TOPOLOGY),
                classifier_training: Some(classifier_training(seed)),
                rule_check: RuleCheck::All,
                ..base
            },
        }
    }

    /// Sets the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        for cfg in [&mut self.autoencoder_training, &mut self.classifier_training]
            .into_iter()
            .flatten()
        {
            cfg.seed = seed;
        }
        self
    }

    pub fn needs_autoencoder(&self) -> bool {
        self.detector != DetectorKind::ClassifierConfidence
    }

    pub fn needs_classifier(&self) -> bool {
        matches!(
            self.detector,
            DetectorKind::ClassifierConfidence | DetectorKind::FullySemantic
        )
    }

    /// Pre-flight checks: everything the detector needs is configured and
    /// semantic topologies satisfy their rules. Runs before any data is read.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Profile(format!("{}: {m}", self.name)));
        self.partition.validate()?;
        if self.needs_autoencoder() {
            let Some(t) = &self.topology else {
                return bad(format!("{} detector needs an autoencoder topology", self.detector));
            };
            if t.io() != PIXELS {
                return bad(format!("topology {t} does not take {PIXELS} inputs"));
            }
            let Some(cfg) = &self.autoencoder_training else {
                return bad("no autoencoder training config".into());
            };
            cfg.validate()?;
            if self.rule_check != RuleCheck::None {
                let report = validate_topology(t, self.partition.known.len(), PIXELS, self.latent_rounding)?;
                let ok = match self.rule_check {
                    RuleCheck::Latent => report.rule1,
                    _ => report.passes(),
                };
                if !ok {
                    return bad(format!(
                        "topology {t} breaks the rules: {}",
                        report.violations().join("; ")
                    ));
                }
            }
        }
        if self.needs_classifier() {
            let Some(cfg) = &self.classifier_training else {
                return bad(format!("{} detector needs a classifier training config", self.detector));
            };
            cfg.validate()?;
        }
        if self.detector == DetectorKind::FullySemantic && self.rule_check != RuleCheck::All {
            return bad("the fully-semantic detector needs a rule-conforming autoencoder".into());
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return bad(format!("percentile {} not in (0, 100]", self.percentile));
        }
        if !(self.min_probability > 0.0 && self.min_probability < 1.0) {
            return bad(format!("min_probability {} not in (0, 1)", self.min_probability));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in ProfileName::ALL {
            let p = ExperimentProfile::builtin(name);
            p.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(name.to_string().parse::<ProfileName>().unwrap(), name);
        }
    }

    #[test]
    fn semantic_profiles_reject_rule_violations() {
        let mut p = ExperimentProfile::builtin(ProfileName::SemiSemanticBest);
        p.topology = Some(NAIVE_TOPOLOGY.parse().unwrap());
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("rule 1"), "{err}");

        let mut p = ExperimentProfile::builtin(ProfileName::SemiSemanticFirst);
        p.topology = Some("784-50-20-50-784".parse().unwrap());
        assert!(p.validate().is_err());

        let mut p = ExperimentProfile::builtin(ProfileName::FullySemantic);
        p.topology = Some(FIRST_SEMANTIC_TOPOLOGY.parse().unwrap());
        assert!(p.validate().is_err());
        p.rule_check = RuleCheck::Latent;
        assert!(p.validate().is_err());
    }

    #[test]
    fn missing_models_rejected() {
        let mut p = ExperimentProfile::builtin(ProfileName::FullySemantic);
        p.classifier_training = None;
        assert!(p.validate().is_err());
        let mut p = ExperimentProfile::builtin(ProfileName::Naive);
        p.topology = None;
        assert!(p.validate().is_err());
    }

    #[test]
    fn seed_propagates_and_json_round_trips() {
        let p = ExperimentProfile::builtin(ProfileName::FullySemantic).with_seed(7);
        assert_eq!(p.classifier_training.as_ref().unwrap().seed, 7);
        assert_eq!(p.autoencoder_training.as_ref().unwrap().seed, 7);
        let json = serde_json::to_string_pretty(&p).unwrap();
        let back: ExperimentProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
