use serde::{Deserialize, Serialize};

use super::DetectorError;

pub const DEFAULT_PERCENTILE: f64 = 99.0;

/// How a score equal to the threshold is treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `score <= value` is known; a tie counts as known.
    #[default]
    AtMost,
    /// `score < value` is known.
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub percentile: f64,
    pub sample_count: usize,
    #[serde(default)]
    pub comparison: Comparison,
}

impl Threshold {
    pub fn is_known(&self, score: f64) -> bool {
        match self.comparison {
            Comparison::AtMost => score <= self.value,
            Comparison::Below => score < self.value,
        }
    }
}

/// Nearest-rank percentile: the `⌈p/100 · N⌉`-th smallest error.
pub fn calibrate_threshold(errors: &[f64], percentile: f64) -> Result<Threshold, DetectorError> {
    if errors.is_empty() {
        return Err(DetectorError::EmptySample);
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(DetectorError::Percentile(percentile));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(DetectorError::NonFinite("calibration errors"));
    }
    let n = errors.len();
    let rank = ((percentile / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted = errors.to_vec();
    let (_, value, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(Threshold {
        value: *value,
        percentile,
        sample_count: n,
        comparison: Comparison::AtMost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let errors: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(calibrate_threshold(&errors, 99.0).unwrap().value, 99.0);
        assert_eq!(calibrate_threshold(&[0.3; 17], 99.0).unwrap().value, 0.3);
        assert_eq!(calibrate_threshold(&[0.7], 1.0).unwrap().value, 0.7);
        assert_eq!(calibrate_threshold(&errors, 100.0).unwrap().value, 100.0);
        assert!(matches!(
            calibrate_threshold(&[], 99.0),
            Err(DetectorError::EmptySample)
        ));
        assert!(calibrate_threshold(&errors, 0.0).is_err());
        assert!(calibrate_threshold(&errors, 100.5).is_err());
    }

    #[test]
    fn tie_handling() {
        let t = calibrate_threshold(&[1.0, 2.0], 50.0).unwrap();
        assert!(t.is_known(1.0));
        let strict = Threshold {
            comparison: Comparison::Below,
            ..t
        };
        assert!(!strict.is_known(1.0));
    }

    proptest! {
        #[test]
        fn at_most_the_tail_exceeds(
            errors in proptest::collection::vec(0.0f64..10.0, 100..400),
            p in 50.0f64..100.0,
        ) {
            let t = calibrate_threshold(&errors, p).unwrap();
            let above = errors.iter().filter(|&&e| e > t.value).count();
            let allowed = ((1.0 - p / 100.0) * errors.len() as f64).ceil() as usize;
            prop_assert!(above <= allowed);
        }

        #[test]
        fn raising_threshold_never_flips_known_to_novel(
            score in 0.0f64..1.0, v in 0.0f64..1.0, bump in 0.0f64..1.0,
        ) {
            let lo = Threshold { value: v, percentile: 99.0, sample_count: 1, comparison: Comparison::AtMost };
            let hi = Threshold { value: v + bump, ..lo };
            prop_assert!(!lo.is_known(score) || hi.is_known(score));
        }
    }
}
