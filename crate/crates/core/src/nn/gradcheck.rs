use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::loss::Loss;
use super::network::{Mode, Network};
use super::rng;
use super::tensor::Tensor;
use super::NnError;

/// Denominator floor for the relative error. Gradients whose magnitudes sum
/// to less than this are effectively compared by absolute difference.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub checked: usize,
    /// Entries whose perturbation crossed a relu or max-pool kink. The loss
    /// is not differentiable across those, so they are not compared.
    pub kinks: usize,
    /// (layer index, parameter index, element) of the worst relative error.
    pub worst: Option<(usize, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many randomly chosen entries per parameter tensor.
    /// `None` checks every entry.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares backprop gradients against central finite differences.
///
/// Runs in 64-bit precision with dropout disabled and batchnorm normalizing
/// with the (deterministic) batch statistics. Entries where the perturbed
/// forward passes switch any relu or max-pool branch are counted in
/// `kinks` and skipped.
pub fn gradient_check(
    net: &Network<f64>,
    inputs: &Tensor<f64>,
    targets: &Tensor<f64>,
    loss: Loss,
    options: &GradCheckOptions,
) -> Result<GradCheckReport, NnError> {
    if !(1e-6..=1e-4).contains(&options.eps) {
        return Err(NnError::Config(format!(
            "finite-difference step {} outside [1e-6, 1e-4]",
            options.eps
        )));
    }
    let mut net = net.clone();
    net.zero_grads();
    let out = net.forward(inputs, Mode::Train, None)?;
    let branches = net.branches();
    net.backward_loss(&out, targets, loss)?;

    let mut pick = rng::derive(options.seed, "gradcheck");
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        checked: 0,
        kinks: 0,
        worst: None,
    };
    let eval = |net: &mut Network<f64>| -> Result<(f64, bool), NnError> {
        let out = net.forward(inputs, Mode::Train, None)?;
        Ok((loss.value(&out, targets)?, net.branches() == branches))
    };
    for (layer, pidx) in net.param_locations() {
        let len = net.param_mut(layer, pidx).value.len();
        let entries: Vec<usize> = match options.max_per_tensor {
            Some(k) if k < len => index::sample(&mut pick, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        for i in entries {
            let analytic = net.param_mut(layer, pidx).grad[i];
            let orig = net.param_mut(layer, pidx).value[i];
            net.param_mut(layer, pidx).value[i] = orig + options.eps;
            let (plus, same_plus) = eval(&mut net)?;
            net.param_mut(layer, pidx).value[i] = orig - options.eps;
            let (minus, same_minus) = eval(&mut net)?;
            net.param_mut(layer, pidx).value[i] = orig;
            if !(same_plus && same_minus) {
                report.kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * options.eps);
            let rel = relative_error(analytic, numeric);
            report.checked += 1;
            report.max_absolute_error = report.max_absolute_error.max((analytic - numeric).abs());
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(rel);
                report.worst = Some((layer, pidx, i));
            }
        }
    }
    Ok(report)
}

/// Analytic gradients of every parameter tensor for one batch, in the same
/// mode as [`gradient_check`].
pub fn analytic_gradients(
    net: &Network<f64>,
    inputs: &Tensor<f64>,
    targets: &Tensor<f64>,
    loss: Loss,
) -> Result<Vec<Vec<f64>>, NnError> {
    let mut net = net.clone();
    net.zero_grads();
    let out = net.forward(inputs, Mode::Train, None)?;
    net.backward_loss(&out, targets, loss)?;
    Ok(net.params().map(|p| p.grad.clone()).collect())
}
