use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    /// Softmax over the feature axis of a flat input.
    Softmax,
}

/// One layer of a sequential network.
///
/// Convolutions use 3x3 kernels with stride 1 and same (zero) padding. Pooling
/// is 2x2 with stride 2 and floors odd sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Fully connected. Inputs of any rank are flattened per sample.
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        filters: usize,
    },
    MaxPool2d,
    BatchNorm,
    Dropout {
        rate: f32,
    },
    Activation {
        function: Activation,
    },
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense { inputs, outputs }
    }

    pub fn activation(function: Activation) -> Self {
        LayerSpec::Activation { function }
    }

    /// Output shape (without batch dimension) for the given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = |what: &str| Err(NnError::Shape(format!("{what} cannot follow input of shape {input:?}")));
        match self {
            LayerSpec::Dense { inputs, outputs } => {
                let width: usize = input.iter().product();
                if width != *inputs {
                    return Err(NnError::Shape(format!(
                        "dense layer expects {inputs} inputs, previous layer yields {width}"
                    )));
                }
                if *outputs == 0 {
                    return Err(NnError::Shape("dense layer with zero outputs".into()));
                }
                Ok(vec![*outputs])
            }
            LayerSpec::Conv2d { filters } => {
                if input.len() != 3 || *filters == 0 {
                    return mismatch("conv2d");
                }
                Ok(vec![*filters, input[1], input[2]])
            }
            LayerSpec::MaxPool2d => {
                if input.len() != 3 || input[1] < 2 || input[2] < 2 {
                    return mismatch("maxpool2d");
                }
                Ok(vec![input[0], input[1] / 2, input[2] / 2])
            }
            LayerSpec::BatchNorm => {
                if input.len() != 1 && input.len() != 3 {
                    return mismatch("batchnorm");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(NnError::Config(format!("dropout rate {rate} not in [0, 1)")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Activation { function } => {
                if *function == Activation::Softmax && input.len() != 1 {
                    return mismatch("softmax");
                }
                Ok(input.to_vec())
            }
        }
    }
}

/// A sequential network: input shape (without batch) and ordered layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        let spec = Self { input_shape, layers };
        spec.layer_shapes()?;
        Ok(spec)
    }

    /// Input shape of every layer followed by the final output shape.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(NnError::Shape(format!("invalid input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NnError> {
        Ok(self.layer_shapes()?.pop().unwrap())
    }

    pub fn input_width(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Fully connected autoencoder with a sigmoid after every layer, e.g.
    /// `[784, 50, 50, 50, 784]`.
    pub fn autoencoder(widths: &[usize]) -> Result<Self, NnError> {
        if widths.len() < 2 {
            return Err(NnError::Config("autoencoder needs at least two widths".into()));
        }
        if widths.first() != widths.last() {
            return Err(NnError::Shape(format!(
                "autoencoder output width {} differs from input width {}",
                widths[widths.len() - 1],
                widths[0]
            )));
        }
        let mut layers = Vec::new();
        for pair in widths.windows(2) {
            layers.push(LayerSpec::dense(pair[0], pair[1]));
            layers.push(LayerSpec::activation(Activation::Sigmoid));
        }
        Self::new(vec![widths[0]], layers)
    }

    /// The digit classifier: three conv blocks (conv + relu, 2x2 max pool,
    /// dropout 0.2, batchnorm) with 28, 64 and 64 filters, then dense
    /// 256 and 128 relu layers and a softmax head of `classes` units.
    pub fn conv_classifier(side: usize, classes: usize) -> Result<Self, NnError> {
        let mut layers = Vec::new();
        let mut shape = vec![1, side, side];
        for filters in [28, 64, 64] {
            for layer in [
                LayerSpec::Conv2d { filters },
                LayerSpec::activation(Activation::Relu),
                LayerSpec::MaxPool2d,
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::BatchNorm,
            ] {
                shape = layer.output_shape(&shape)?;
                layers.push(layer);
            }
        }
        let flat: usize = shape.iter().product();
        layers.extend([
            LayerSpec::dense(flat, 256),
            LayerSpec::activation(Activation::Relu),
            LayerSpec::dense(256, 128),
            LayerSpec::activation(Activation::Relu),
            LayerSpec::dense(128, classes),
            LayerSpec::activation(Activation::Softmax),
        ]);
        Self::new(vec![1, side, side], layers)
    }

    pub fn is_autoencoder(&self) -> bool {
        self.output_shape()
            .map(|out| out.iter().product::<usize>() == self.input_width())
            .unwrap_or(false)
    }

    pub fn ends_with_softmax(&self) -> bool {
        matches!(
            self.layers.last(),
            Some(LayerSpec::Activation {
                function: Activation::Softmax
            })
        )
    }
}
