use super::layer::{Layer, Param};
use super::loss::{self, Loss};
use super::real::Real;
use super::rng::{self, Rng};
use super::spec::NetworkSpec;
use super::tensor::Tensor;
use super::NnError;

/// Forward pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active (when an RNG is supplied), batchnorm on batch
    /// statistics, activations cached for backprop.
    Train,
    /// Dropout is the identity, batchnorm uses running statistics.
    Infer,
}

/// A sequential network with weights.
#[derive(Debug, Clone)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    /// Builds a network with Glorot-uniform weights drawn from `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self, NnError> {
        let shapes = spec.layer_shapes()?;
        let mut rng = rng::derive(seed, "init");
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| Layer::init(l, &shapes[i], &shapes[i + 1], &mut rng))
            .collect();
        Ok(Self { spec, layers })
    }

    /// Builds a network from stored blobs, one per parameter/buffer tensor in
    /// declared layer order.
    pub fn from_blobs(spec: NetworkSpec, blobs: Vec<Vec<T>>) -> Result<Self, NnError> {
        let mut net = Self::new(spec, 0)?;
        let expected: usize = net.layers.iter().map(|l| l.blob_sizes().len()).sum();
        if blobs.len() != expected {
            return Err(NnError::Shape(format!(
                "expected {expected} weight tensors, got {}",
                blobs.len()
            )));
        }
        let mut it = blobs.into_iter();
        for layer in &mut net.layers {
            for slot in layer.blobs_mut() {
                let blob = it.next().unwrap();
                if blob.len() != slot.len() {
                    return Err(NnError::Shape(format!(
                        "weight tensor has {} values, layer needs {}",
                        blob.len(),
                        slot.len()
                    )));
                }
                *slot = blob;
            }
        }
        for layer in &mut net.layers {
            layer.zero_grads();
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Every parameter and buffer tensor in declared layer order.
    pub fn blobs(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.blobs()).collect()
    }

    pub fn blob_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| l.blob_sizes()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params.iter())
            .map(|p| p.value.len())
            .sum()
    }

    /// Element-wise copy into another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<(), NnError> {
        let shape = batch.shape();
        if shape.len() != self.spec.input_shape.len() + 1 || shape[1..] != self.spec.input_shape[..] {
            return Err(NnError::Shape(format!(
                "batch shape {shape:?} does not match network input {:?}",
                self.spec.input_shape
            )));
        }
        Ok(())
    }

    /// Pure inference pass: repeated calls yield identical outputs.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.infer(&x);
        }
        Ok(x)
    }

    /// Forward pass in the given mode. `rng` drives dropout masks in train
    /// mode; without it dropout is disabled.
    pub fn forward(&mut self, batch: &Tensor<T>, mode: Mode, mut rng: Option<&mut Rng>) -> Result<Tensor<T>, NnError> {
        if mode == Mode::Infer {
            return self.infer(batch);
        }
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &mut self.layers {
            x = layer.forward_train(x, rng.as_deref_mut());
        }
        Ok(x)
    }

    pub fn zero_grads(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grads);
    }

    pub fn clear_caches(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    /// Computes the batch loss of `output` (from a train-mode forward) against
    /// `target` and backpropagates it, accumulating parameter gradients.
    ///
    /// Cross-entropy requires a softmax head; the gradient then enters at the
    /// logits as `(p - t) / n`.
    pub fn backward_loss(&mut self, output: &Tensor<T>, target: &Tensor<T>, loss: Loss) -> Result<T, NnError> {
        let (value, grad, skip_last) = match loss {
            Loss::Mse => {
                let (v, g) = loss::mse_with_grad(output, target)?;
                (v, g, false)
            }
            Loss::CrossEntropy => {
                if !self.spec.ends_with_softmax() {
                    return Err(NnError::Config(
                        "cross-entropy training needs a softmax output layer".into(),
                    ));
                }
                let (v, g) = loss::softmax_cross_entropy_with_grad(output, target)?;
                (v, g, true)
            }
        };
        let upto = self.layers.len() - usize::from(skip_last);
        let mut dy = grad;
        for (i, layer) in self.layers[..upto].iter_mut().enumerate().rev() {
            dy = layer.backward(dy, i > 0);
        }
        Ok(value)
    }

    /// Loss of an inference pass, for monitoring.
    pub fn loss(&self, batch: &Tensor<T>, target: &Tensor<T>, loss: Loss) -> Result<T, NnError> {
        let out = self.infer(batch)?;
        loss.value(&out, target)
    }

    /// Relu and max-pool branch choices of the last training forward.
    pub(crate) fn branches(&self) -> Vec<Vec<usize>> {
        self.layers.iter().filter_map(Layer::branches).collect()
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    /// (layer index, parameter index within layer) for every parameter tensor.
    pub(crate) fn param_locations(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| (0..l.params.len()).map(move |j| (i, j)))
            .collect()
    }

    pub(crate) fn param_mut(&mut self, layer: usize, index: usize) -> &mut Param<T> {
        &mut self.layers[layer].params[index]
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.blobs())
            .all(|b| b.iter().all(|v| v.is_finite()))
    }
}
