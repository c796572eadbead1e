use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Detector, DetectorError, DetectorKind, NoveltyVerdict};
use crate::dataset::{DatasetSplit, LabeledImage};

pub const HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSet {
    KnownDigits,
    UnknownDigits,
    Letters,
}

impl EvalSet {
    pub const ALL: [EvalSet; 3] = [EvalSet::KnownDigits, EvalSet::UnknownDigits, EvalSet::Letters];

    /// Snake-case name used in CSV output.
    pub fn key(self) -> &'static str {
        match self {
            EvalSet::KnownDigits => "known_digits",
            EvalSet::UnknownDigits => "unknown_digits",
            EvalSet::Letters => "letters",
        }
    }

    pub fn images(self, split: &DatasetSplit) -> &[LabeledImage] {
        match self {
            EvalSet::KnownDigits => &split.eval_known,
            EvalSet::UnknownDigits => &split.eval_unknown,
            EvalSet::Letters => &split.eval_letters,
        }
    }
}

impl fmt::Display for EvalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSet::KnownDigits => "known digits",
            EvalSet::UnknownDigits => "unknown digits",
            EvalSet::Letters => "letters",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub set: EvalSet,
    pub not_novel: usize,
    pub novel: usize,
}

impl ResultRow {
    pub fn total(&self) -> usize {
        self.not_novel + self.novel
    }
}

/// Per eval set, how many images were recognized as not novel / novel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultTable {
    pub detector: DetectorKind,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, set: EvalSet) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.set == set)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("detector,set,not_novel,novel\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", self.detector, r.set.key(), r.not_novel, r.novel);
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "**{}**\n\n| | Recognized as not novel | Recognized as novel |\n|---|---|---|\n",
            self.detector
        );
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {} | {} |", r.set, r.not_novel, r.novel);
        }
        s
    }
}

/// Equal-width histogram over the pooled reconstruction errors of all sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub counts: Vec<(EvalSet, Vec<usize>)>,
}

impl Histogram {
    pub fn build(samples: &[(EvalSet, Vec<f64>)], bins: usize) -> Option<Self> {
        let all = samples.iter().flat_map(|(_, v)| v.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if !lo.is_finite() || bins == 0 {
            return None;
        }
        let width = (hi - lo) / bins as f64;
        let counts = samples
            .iter()
            .map(|(set, v)| {
                let mut c = vec![0; bins];
                for &x in v {
                    let b = if width > 0.0 { ((x - lo) / width) as usize } else { 0 };
                    c[b.min(bins - 1)] += 1;
                }
                (*set, c)
            })
            .collect();
        Some(Self { lo, hi, bins, counts })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi");
        for (set, _) in &self.counts {
            let _ = write!(s, ",{}", set.key());
        }
        s.push('\n');
        let width = (self.hi - self.lo) / self.bins as f64;
        for b in 0..self.bins {
            let _ = write!(s, "{},{}", self.lo + width * b as f64, self.lo + width * (b + 1) as f64);
            for (_, c) in &self.counts {
                let _ = write!(s, ",{}", c[b]);
            }
            s.push('\n');
        }
        s
    }
}

/// Full outcome of running one detector over the three eval sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub table: ResultTable,
    pub verdicts: Vec<(EvalSet, Vec<NoveltyVerdict>)>,
    /// Raw reconstruction errors per set (reconstruction detectors only).
    pub scores: Option<Vec<(EvalSet, Vec<f64>)>>,
    pub histogram: Option<Histogram>,
    pub threshold: Option<f64>,
}

pub fn evaluate_detector(detector: &Detector, split: &DatasetSplit) -> Result<Evaluation, DetectorError> {
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut scores = Vec::new();
    let reconstruction = matches!(detector.kind(), DetectorKind::Naive | DetectorKind::SemiSemantic);
    for set in EvalSet::ALL {
        let images: Vec<&[f32]> = set.images(split).iter().map(|i| i.pixels.as_slice()).collect();
        let v = if images.is_empty() {
            Vec::new()
        } else {
            detector.detect_batch(&images)?
        };
        let novel = v.iter().filter(|v| v.is_novel()).count();
        rows.push(ResultRow {
            set,
            not_novel: v.len() - novel,
            novel,
        });
        if reconstruction {
            let s = v
                .iter()
                .filter_map(|v| match v.evidence {
                    super::Evidence::Reconstruction { score, .. } => Some(score),
                    _ => None,
                })
                .collect();
            scores.push((set, s));
        }
        verdicts.push((set, v));
    }
    let histogram = reconstruction
        .then(|| Histogram::build(&scores, HISTOGRAM_BINS))
        .flatten();
    Ok(Evaluation {
        table: ResultTable {
            detector: detector.kind(),
            rows,
        },
        verdicts,
        scores: reconstruction.then_some(scores),
        histogram,
        threshold: detector.threshold().map(|t| t.value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_sample() {
        let samples = vec![
            (EvalSet::KnownDigits, vec![0.0, 0.1, 0.2]),
            (EvalSet::Letters, vec![0.9, 1.0]),
        ];
        let h = Histogram::build(&samples, 10).unwrap();
        assert_eq!(h.counts[0].1.iter().sum::<usize>(), 3);
        assert_eq!(h.counts[1].1[9], 2);
        assert_eq!(h.to_csv().lines().count(), 11);
        assert!(Histogram::build(&[(EvalSet::Letters, vec![])], 10).is_none());
        let flat = Histogram::build(&[(EvalSet::Letters, vec![0.5, 0.5])], 4).unwrap();
        assert_eq!(flat.counts[0].1, vec![2, 0, 0, 0]);
    }

    #[test]
    fn table_exports() {
        let t = ResultTable {
            detector: DetectorKind::Naive,
            rows: vec![ResultRow {
                set: EvalSet::UnknownDigits,
                not_novel: 83,
                novel: 17,
            }],
        };
        assert_eq!(t.to_csv(), "detector,set,not_novel,novel\nnaive,unknown_digits,83,17\n");
        assert!(t.to_markdown().contains("| unknown digits | 83 | 17 |"));
    }
}
