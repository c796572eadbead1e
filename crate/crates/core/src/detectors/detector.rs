use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DetectorError, Threshold};
use crate::nn::{mse_flat, Network, NnError, Tensor};

pub const DEFAULT_MIN_PROBABILITY: f64 = 0.99;

/// Images are pushed through the networks in chunks of this many.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Naive,
    SemiSemantic,
    ClassifierConfidence,
    FullySemantic,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Naive => "naive",
            DetectorKind::SemiSemantic => "semi-semantic",
            DetectorKind::ClassifierConfidence => "classifier-confidence",
            DetectorKind::FullySemantic => "fully-semantic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Known,
    Novel,
}

/// A classifier's decision: the index of a known class, or none when no
/// probability clears the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDecision {
    pub class: Option<usize>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Reconstruction {
        score: f64,
        threshold: f64,
    },
    Confidence {
        raw: ClassDecision,
    },
    Semantic {
        raw: ClassDecision,
        reconstructed: ClassDecision,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyVerdict {
    pub verdict: Verdict,
    pub detector: DetectorKind,
    pub evidence: Evidence,
}

impl NoveltyVerdict {
    pub fn is_novel(&self) -> bool {
        self.verdict == Verdict::Novel
    }
}

fn to_batch(net: &Network, images: &[&[f32]]) -> Result<Tensor, NnError> {
    let mut shape = vec![images.len()];
    shape.extend(&net.spec().input_shape);
    let width = net.spec().input_width();
    let mut flat = Vec::with_capacity(images.len() * width);
    for im in images {
        if im.len() != width {
            return Err(NnError::Shape(format!(
                "image has {} values, network expects {width}",
                im.len()
            )));
        }
        flat.extend_from_slice(im);
    }
    Tensor::new(shape, flat)
}

fn check_autoencoder(ae: &Network) -> Result<(), DetectorError> {
    if !ae.spec().is_autoencoder() {
        return Err(DetectorError::Model(
            "network output width differs from its input width".into(),
        ));
    }
    Ok(())
}

/// Autoencoder reconstructions, one flat vector per image.
pub fn reconstruct(ae: &Network, images: &[&[f32]]) -> Result<Vec<Vec<f32>>, DetectorError> {
    check_autoencoder(ae)?;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(CHUNK) {
        let y = ae.infer(&to_batch(ae, chunk)?)?;
        out.extend((0..chunk.len()).map(|i| y.row(i).to_vec()));
    }
    Ok(out)
}

/// Reconstruction MSE per image.
pub fn reconstruction_scores(ae: &Network, images: &[&[f32]]) -> Result<Vec<f64>, DetectorError> {
    let recon = reconstruct(ae, images)?;
    images
        .iter()
        .zip(&recon)
        .map(|(x, y)| mse_flat(x, y).map_err(DetectorError::from))
        .collect()
}

pub fn reconstruction_score(ae: &Network, image: &[f32]) -> Result<f64, DetectorError> {
    Ok(reconstruction_scores(ae, &[image])?[0])
}

/// Picks the most probable class if its probability strictly exceeds
/// `min_probability`. Ties go to the lowest index.
pub fn decide<T: Copy + Into<f64>>(probs: &[T], min_probability: f64) -> Result<ClassDecision, DetectorError> {
    let sum: f64 = probs.iter().map(|&p| p.into()).sum();
    if !sum.is_finite() || (sum - 1.0).abs() > 1e-3 {
        return Err(DetectorError::NotProbability(sum));
    }
    let (best, confidence) =
        probs.iter().map(|&p| p.into()).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, p)| if p > acc.1 { (i, p) } else { acc },
        );
    Ok(ClassDecision {
        class: (confidence > min_probability).then_some(best),
        confidence,
    })
}

fn classify_batch(
    classifier: &Network,
    images: &[&[f32]],
    min_probability: f64,
) -> Result<Vec<ClassDecision>, DetectorError> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(CHUNK) {
        let y = classifier.infer(&to_batch(classifier, chunk)?)?;
        for i in 0..chunk.len() {
            out.push(decide(y.row(i), min_probability)?);
        }
    }
    Ok(out)
}

pub fn classify_with_confidence(
    classifier: &Network,
    image: &[f32],
    min_probability: f64,
) -> Result<ClassDecision, DetectorError> {
    Ok(classify_batch(classifier, &[image], min_probability)?[0])
}

/// One configured detector. Immutable once built, so it can be shared
/// between an offline evaluation and a serving monitor.
#[derive(Debug, Clone)]
pub struct Detector {
    kind: DetectorKind,
    autoencoder: Option<Network>,
    classifier: Option<Network>,
    threshold: Option<Threshold>,
    min_probability: f64,
}

impl Detector {
    /// Reconstruction-threshold detector; `kind` is naive or semi-semantic.
    pub fn reconstruction(
        kind: DetectorKind,
        autoencoder: Network,
        threshold: Threshold,
    ) -> Result<Self, DetectorError> {
        if !matches!(kind, DetectorKind::Naive | DetectorKind::SemiSemantic) {
            return Err(DetectorError::Model(format!("{kind} is not a reconstruction detector")));
        }
        check_autoencoder(&autoencoder)?;
        Ok(Self {
            kind,
            autoencoder: Some(autoencoder),
            classifier: None,
            threshold: Some(threshold),
            min_probability: DEFAULT_MIN_PROBABILITY,
        })
    }

    pub fn classifier_confidence(classifier: Network, min_probability: f64) -> Result<Self, DetectorError> {
        if !classifier.spec().ends_with_softmax() {
            return Err(DetectorError::Model("classifier must end in softmax".into()));
        }
        Ok(Self {
            kind: DetectorKind::ClassifierConfidence,
            autoencoder: None,
            classifier: Some(classifier),
            threshold: None,
            min_probability,
        })
    }

    pub fn fully_semantic(
        classifier: Network,
        autoencoder: Network,
        min_probability: f64,
    ) -> Result<Self, DetectorError> {
        check_autoencoder(&autoencoder)?;
        if classifier.spec().input_width() != autoencoder.spec().input_width() {
            return Err(DetectorError::Model(
                "classifier and autoencoder input widths differ".into(),
            ));
        }
        let mut d = Self::classifier_confidence(classifier, min_probability)?;
        d.kind = DetectorKind::FullySemantic;
        d.autoencoder = Some(autoencoder);
        Ok(d)
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn threshold(&self) -> Option<&Threshold> {
        self.threshold.as_ref()
    }

    pub fn min_probability(&self) -> f64 {
        self.min_probability
    }

    pub fn autoencoder(&self) -> Option<&Network> {
        self.autoencoder.as_ref()
    }

    pub fn classifier(&self) -> Option<&Network> {
        self.classifier.as_ref()
    }

    fn need<'a>(&self, net: &'a Option<Network>, what: &'static str) -> Result<&'a Network, DetectorError> {
        net.as_ref()
            .ok_or(DetectorError::MissingModel { kind: self.kind, what })
    }

    /// Reconstruction errors, for detectors that have an autoencoder.
    pub fn scores(&self, images: &[&[f32]]) -> Result<Vec<f64>, DetectorError> {
        reconstruction_scores(self.need(&self.autoencoder, "an autoencoder")?, images)
    }

    pub fn detect_batch(&self, images: &[&[f32]]) -> Result<Vec<NoveltyVerdict>, DetectorError> {
        let kind = self.kind;
        let verdict = |known: bool, evidence| NoveltyVerdict {
            verdict: if known { Verdict::Known } else { Verdict::Novel },
            detector: kind,
            evidence,
        };
        match kind {
            DetectorKind::Naive | DetectorKind::SemiSemantic => {
                let t = self.threshold.ok_or(DetectorError::MissingModel {
                    kind,
                    what: "a calibrated threshold",
                })?;
                Ok(self
                    .scores(images)?
                    .into_iter()
                    .map(|score| {
                        verdict(
                            t.is_known(score),
                            Evidence::Reconstruction {
                                score,
                                threshold: t.value,
                            },
                        )
                    })
                    .collect())
            }
            DetectorKind::ClassifierConfidence => {
                let c = self.need(&self.classifier, "a classifier")?;
                Ok(classify_batch(c, images, self.min_probability)?
                    .into_iter()
                    .map(|raw| verdict(raw.class.is_some(), Evidence::Confidence { raw }))
                    .collect())
            }
            DetectorKind::FullySemantic => {
                let c = self.need(&self.classifier, "a classifier")?;
                let ae = self.need(&self.autoencoder, "an autoencoder")?;
                let recon = reconstruct(ae, images)?;
                let recon_refs: Vec<&[f32]> = recon.iter().map(Vec::as_slice).collect();
                let raw = classify_batch(c, images, self.min_probability)?;
                let rec = classify_batch(c, &recon_refs, self.min_probability)?;
                Ok(raw
                    .into_iter()
                    .zip(rec)
                    .map(|(raw, reconstructed)| {
                        let known = raw.class.is_some() && raw.class == reconstructed.class;
                        verdict(known, Evidence::Semantic { raw, reconstructed })
                    })
                    .collect())
            }
        }
    }

    pub fn detect(&self, image: &[f32]) -> Result<NoveltyVerdict, DetectorError> {
        Ok(self.detect_batch(&[image])?.remove(0))
    }
}

/// Known iff the reconstruction error is within the threshold.
pub fn naive_detect(ae: &Network, threshold: &Threshold, image: &[f32]) -> Result<NoveltyVerdict, DetectorError> {
    let score = reconstruction_score(ae, image)?;
    let known = threshold.is_known(score);
    Ok(NoveltyVerdict {
        verdict: if known { Verdict::Known } else { Verdict::Novel },
        detector: DetectorKind::Naive,
        evidence: Evidence::Reconstruction {
            score,
            threshold: threshold.value,
        },
    })
}

/// Known iff the classifier confidently assigns the same class to the image
/// and to its reconstruction.
pub fn fully_semantic_detect(
    classifier: &Network,
    ae: &Network,
    image: &[f32],
    min_probability: f64,
) -> Result<NoveltyVerdict, DetectorError> {
    let raw = classify_with_confidence(classifier, image, min_probability)?;
    let recon = reconstruct(ae, &[image])?;
    let reconstructed = classify_with_confidence(classifier, &recon[0], min_probability)?;
    let known = raw.class.is_some() && raw.class == reconstructed.class;
    Ok(NoveltyVerdict {
        verdict: if known { Verdict::Known } else { Verdict::Novel },
        detector: DetectorKind::FullySemantic,
        evidence: Evidence::Semantic { raw, reconstructed },
    })
}
