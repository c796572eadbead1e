use serde::{Deserialize, Serialize};

use super::real::Real;
use super::tensor::Tensor;
use super::NnError;

/// Probabilities are clamped to `[CE_EPSILON, 1]` before taking the log.
pub const CE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean over all elements of the squared difference.
    Mse,
    /// Categorical cross-entropy averaged over the batch.
    CrossEntropy,
}

impl Loss {
    pub fn value<T: Real>(self, output: &Tensor<T>, target: &Tensor<T>) -> Result<T, NnError> {
        match self {
            Loss::Mse => mse_slices(output.data(), target.data()).map(T::cast_f64),
            Loss::CrossEntropy => {
                same_len(output.data(), target.data())?;
                let w = output.row_len();
                let n = output.batch() as f64;
                let total: f64 = output
                    .data()
                    .chunks_exact(w)
                    .zip(target.data().chunks_exact(w))
                    .map(|(p, t)| ce_row(p, t))
                    .sum();
                Ok(T::cast_f64(total / n))
            }
        }
    }
}

fn same_len<T>(a: &[T], b: &[T]) -> Result<(), NnError> {
    if a.len() != b.len() {
        return Err(NnError::Shape(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

fn mse_slices<T: Real>(a: &[T], b: &[T]) -> Result<f64, NnError> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(NnError::Shape("mse of empty input".into()));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.to_f64().unwrap() - y.to_f64().unwrap();
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

fn ce_row<T: Real>(pred: &[T], label: &[T]) -> f64 {
    pred.iter()
        .zip(label)
        .map(|(p, t)| {
            let p = p.to_f64().unwrap().clamp(CE_EPSILON, 1.0);
            -t.to_f64().unwrap() * p.ln()
        })
        .sum()
}

/// Mean squared element-wise difference of two equally shaped tensors.
pub fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64, NnError> {
    if a.shape() != b.shape() {
        return Err(NnError::Shape(format!(
            "mse of shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    mse_slices(a.data(), b.data())
}

/// MSE of two flat slices, e.g. an image against its reconstruction.
pub fn mse_flat(a: &[f32], b: &[f32]) -> Result<f64, NnError> {
    mse_slices(a, b)
}

/// `-Σ label_i · ln(clamp(pred_i))` for a single probability vector.
pub fn cross_entropy(pred: &[f64], label: &[f64]) -> Result<f64, NnError> {
    same_len(pred, label)?;
    let sum: f64 = pred.iter().sum();
    if (sum - 1.0).abs() > 1e-5 {
        return Err(NnError::Shape(format!(
            "prediction sums to {sum}, expected a probability vector"
        )));
    }
    Ok(ce_row(pred, label))
}

pub(crate) fn mse_with_grad<T: Real>(output: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>), NnError> {
    same_len(output.data(), target.data())?;
    let n = T::cast_f64(output.len() as f64);
    let two = T::cast_f64(2.0);
    let mut grad = output.clone();
    let mut sum = T::zero();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        sum = sum + d * d;
        *g = two * d / n;
    }
    Ok((sum / n, grad))
}

/// Cross-entropy of softmax probabilities with the gradient taken at the
/// logits, `(p - t) / n`.
pub(crate) fn softmax_cross_entropy_with_grad<T: Real>(
    probs: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(T, Tensor<T>), NnError> {
    let value = Loss::CrossEntropy.value(probs, target)?;
    let n = T::cast_f64(probs.batch() as f64);
    let mut grad = probs.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - t) / n;
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        let a = Tensor::new(vec![1, 784], vec![1.0f32; 784]).unwrap();
        let b = Tensor::new(vec![1, 784], vec![0.0f32; 784]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        let c = Tensor::new(vec![1, 2], vec![0.0f64, 0.5]).unwrap();
        let d = Tensor::new(vec![1, 2], vec![0.5f64, 0.0]).unwrap();
        assert_eq!(mse(&c, &d).unwrap(), 0.25);
        let e = Tensor::new(vec![2, 1], vec![0.0f64, 0.5]).unwrap();
        assert!(mse(&c, &e).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut onehot = vec![0.0; 7];
        onehot[3] = 1.0;
        assert!(cross_entropy(&onehot, &onehot).unwrap().abs() < 1e-12);
        let uniform = vec![1.0 / 7.0; 7];
        assert!((cross_entropy(&uniform, &onehot).unwrap() - 7f64.ln()).abs() < 1e-12);
        let mut pred = vec![0.0; 7];
        pred[0] = 0.99;
        pred[1] = 0.01;
        let mut label = vec![0.0; 7];
        label[0] = 1.0;
        let v = cross_entropy(&pred, &label).unwrap();
        assert!((v - 0.010050335853501).abs() < 1e-12, "{v}");
        assert!(cross_entropy(&pred, &label[..6]).is_err());
    }

    proptest! {
        #[test]
        fn mse_nonnegative_and_zero_iff_equal(
            a in proptest::collection::vec(-10.0f64..10.0, 1..50),
            delta in proptest::collection::vec(-1.0f64..1.0, 50),
        ) {
            let b: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + d).collect();
            let ta = Tensor::new(vec![1, a.len()], a.clone()).unwrap();
            let tb = Tensor::new(vec![1, a.len()], b.clone()).unwrap();
            let v = mse(&ta, &tb).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, a == b);
            prop_assert_eq!(mse(&ta, &ta).unwrap(), 0.0);
        }
    }
}
