use rand::Rng as _;

use super::real::Real;
use super::rng::Rng;
use super::spec::{Activation, LayerSpec};
use super::tensor::Tensor;

pub(crate) const BN_MOMENTUM: f64 = 0.9;
pub(crate) const BN_EPSILON: f64 = 1e-5;

/// A trainable parameter tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> Param<T> {
    fn new(value: Vec<T>) -> Self {
        let grad = vec![T::zero(); value.len()];
        Self { value, grad }
    }
}

#[derive(Debug, Clone)]
enum Cache<T> {
    Empty,
    Input(Tensor<T>),
    Output(Tensor<T>),
    Argmax(Vec<usize>),
    Norm { xhat: Vec<T>, inv_std: Vec<T> },
    Mask(Vec<T>),
}

/// Runtime state of one layer: parameters, non-trainable buffers (batchnorm
/// running statistics) and the forward cache used by backprop.
#[derive(Debug, Clone)]
pub(crate) struct Layer<T> {
    pub spec: LayerSpec,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub params: Vec<Param<T>>,
    pub buffers: Vec<Vec<T>>,
    cache: Cache<T>,
}

fn glorot<T: Real>(fan_in: usize, fan_out: usize, count: usize, rng: &mut Rng) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count)
        .map(|_| T::cast_f64(rng.random_range(-limit..limit)))
        .collect()
}

impl<T: Real> Layer<T> {
    /// Allocates a layer with Glorot-uniform weights and zero biases.
    pub fn init(spec: &LayerSpec, in_shape: &[usize], out_shape: &[usize], rng: &mut Rng) -> Self {
        let (params, buffers) = match *spec {
            LayerSpec::Dense { inputs, outputs } => (
                vec![
                    Param::new(glorot(inputs, outputs, inputs * outputs, rng)),
                    Param::new(vec![T::zero(); outputs]),
                ],
                vec![],
            ),
            LayerSpec::Conv2d { filters } => {
                let fan_in = in_shape[0] * 9;
                (
                    vec![
                        Param::new(glorot(fan_in, filters * 9, filters * fan_in, rng)),
                        Param::new(vec![T::zero(); filters]),
                    ],
                    vec![],
                )
            }
            LayerSpec::BatchNorm => {
                let c = in_shape[0];
                (
                    vec![Param::new(vec![T::one(); c]), Param::new(vec![T::zero(); c])],
                    vec![vec![T::zero(); c], vec![T::one(); c]],
                )
            }
            _ => (vec![], vec![]),
        };
        Self {
            spec: spec.clone(),
            in_shape: in_shape.to_vec(),
            out_shape: out_shape.to_vec(),
            params,
            buffers,
            cache: Cache::Empty,
        }
    }

    /// Sizes of the parameter tensors followed by the buffers, in storage order.
    pub fn blob_sizes(&self) -> Vec<usize> {
        self.params
            .iter()
            .map(|p| p.value.len())
            .chain(self.buffers.iter().map(Vec::len))
            .collect()
    }

    pub fn blobs(&self) -> Vec<&[T]> {
        self.params
            .iter()
            .map(|p| p.value.as_slice())
            .chain(self.buffers.iter().map(Vec::as_slice))
            .collect()
    }

    pub fn blobs_mut(&mut self) -> Vec<&mut Vec<T>> {
        let Self { params, buffers, .. } = self;
        params
            .iter_mut()
            .map(|p| &mut p.value)
            .chain(buffers.iter_mut())
            .collect()
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        let conv = |v: &Vec<T>| -> Vec<U> { v.iter().map(|x| U::cast_f64(x.to_f64().unwrap_or(f64::NAN))).collect() };
        Layer {
            spec: self.spec.clone(),
            in_shape: self.in_shape.clone(),
            out_shape: self.out_shape.clone(),
            params: self.params.iter().map(|p| Param::new(conv(&p.value))).collect(),
            buffers: self.buffers.iter().map(conv).collect(),
            cache: Cache::Empty,
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn clear_cache(&mut self) {
        self.cache = Cache::Empty;
    }

    /// Which linear piece each unit used in the last training forward: relu
    /// signs and max-pool winners. `None` for smooth layers.
    pub fn branches(&self) -> Option<Vec<usize>> {
        match (&self.spec, &self.cache) {
            (LayerSpec::MaxPool2d, Cache::Argmax(idx)) => Some(idx.clone()),
            (
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                Cache::Input(x),
            ) => Some(x.data().iter().map(|&v| usize::from(v > T::zero())).collect()),
            _ => None,
        }
    }

    fn out_batch_shape(&self, n: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.out_shape.len() + 1);
        s.push(n);
        s.extend_from_slice(&self.out_shape);
        s
    }

    /// Inference forward pass. Dropout is the identity and batchnorm uses its
    /// running statistics. Does not touch any cache.
    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        match &self.spec {
            LayerSpec::Dense { .. } => self.dense_forward(x),
            LayerSpec::Conv2d { .. } => self.conv_forward(x),
            LayerSpec::MaxPool2d => self.pool_forward(x).0,
            LayerSpec::BatchNorm => self.norm_infer(x),
            LayerSpec::Dropout { .. } => x.clone(),
            LayerSpec::Activation { function } => activate(*function, x),
        }
    }

    /// Training forward pass; caches what backprop needs. Dropout masks are
    /// drawn from `rng` when given, otherwise dropout is disabled.
    pub fn forward_train(&mut self, x: Tensor<T>, rng: Option<&mut Rng>) -> Tensor<T> {
        match self.spec.clone() {
            LayerSpec::Dense { .. } => {
                let y = self.dense_forward(&x);
                self.cache = Cache::Input(x);
                y
            }
            LayerSpec::Conv2d { .. } => {
                let y = self.conv_forward(&x);
                self.cache = Cache::Input(x);
                y
            }
            LayerSpec::MaxPool2d => {
                let (y, idx) = self.pool_forward(&x);
                self.cache = Cache::Argmax(idx);
                y
            }
            LayerSpec::BatchNorm => self.norm_train(x),
            LayerSpec::Dropout { rate } => match rng {
                Some(rng) if rate > 0.0 => {
                    let keep = 1.0 - f64::from(rate);
                    let scale = T::cast_f64(1.0 / keep);
                    let mask: Vec<T> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
                        .collect();
                    let mut y = x;
                    y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v = *v * *m);
                    self.cache = Cache::Mask(mask);
                    y
                }
                _ => {
                    self.cache = Cache::Empty;
                    x
                }
            },
            LayerSpec::Activation { function } => {
                let y = activate(function, &x);
                self.cache = match function {
                    Activation::Relu => Cache::Input(x),
                    _ => Cache::Output(y.clone()),
                };
                y
            }
        }
    }

    /// Backprop through the layer using the cache of the last
    /// [`forward_train`](Self::forward_train). Accumulates parameter gradients
    /// and returns the gradient with respect to the layer input. With
    /// `need_input_grad` false, dense and conv layers skip that product and
    /// the returned tensor is unspecified.
    pub fn backward(&mut self, dy: Tensor<T>, need_input_grad: bool) -> Tensor<T> {
        let n = dy.batch();
        let mut in_batch = vec![n];
        in_batch.extend_from_slice(&self.in_shape);
        match (&self.spec, &self.cache) {
            (LayerSpec::Dense { inputs, outputs }, Cache::Input(x)) => {
                let (inputs, outputs) = (*inputs, *outputs);
                let [w, b] = &mut self.params[..] else { unreachable!() };
                // dW += dYᵀ X
                T::gemm(
                    outputs,
                    n,
                    inputs,
                    T::one(),
                    dy.data(),
                    1,
                    outputs as isize,
                    x.data(),
                    inputs as isize,
                    1,
                    T::one(),
                    &mut w.grad,
                    inputs as isize,
                    1,
                );
                for row in dy.data().chunks_exact(outputs) {
                    for (g, d) in b.grad.iter_mut().zip(row) {
                        *g = *g + *d;
                    }
                }
                if !need_input_grad {
                    return dy;
                }
                // dX = dY W
                let mut dx = Tensor::zeros(in_batch);
                T::gemm(
                    n,
                    outputs,
                    inputs,
                    T::one(),
                    dy.data(),
                    outputs as isize,
                    1,
                    &w.value,
                    inputs as isize,
                    1,
                    T::zero(),
                    dx.data_mut(),
                    inputs as isize,
                    1,
                );
                dx
            }
            (LayerSpec::Conv2d { filters }, Cache::Input(x)) => {
                let filters = *filters;
                let (c, h, wd) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
                let hw = h * wd;
                let c9 = c * 9;
                let ld = n * hw;
                let cols = self.batch_cols(x);
                // gather dy from (n, f, hw) into (f, n*hw)
                let mut dout = vec![T::zero(); filters * ld];
                for (s, ys) in dy.data().chunks_exact(filters * hw).enumerate() {
                    for (f, src) in ys.chunks_exact(hw).enumerate() {
                        dout[f * ld + s * hw..][..hw].copy_from_slice(src);
                    }
                }
                let [w, b] = &mut self.params[..] else { unreachable!() };
                // dW += dOut colsᵀ
                T::gemm(
                    filters,
                    ld,
                    c9,
                    T::one(),
                    &dout,
                    ld as isize,
                    1,
                    &cols,
                    1,
                    ld as isize,
                    T::one(),
                    &mut w.grad,
                    c9 as isize,
                    1,
                );
                for (f, g) in b.grad.iter_mut().enumerate() {
                    *g = *g + dout[f * ld..(f + 1) * ld].iter().copied().sum::<T>();
                }
                if !need_input_grad {
                    return dy;
                }
                // dcols = Wᵀ dOut
                let mut dcols = cols;
                T::gemm(
                    c9,
                    filters,
                    ld,
                    T::one(),
                    &w.value,
                    1,
                    c9 as isize,
                    &dout,
                    ld as isize,
                    1,
                    T::zero(),
                    &mut dcols,
                    ld as isize,
                    1,
                );
                let mut dx = Tensor::zeros(in_batch);
                for (s, dxs) in dx.data_mut().chunks_exact_mut(c * hw).enumerate() {
                    col2im_add(&dcols, c, h, wd, dxs, ld, s * hw);
                }
                dx
            }
            (LayerSpec::MaxPool2d, Cache::Argmax(idx)) => {
                let mut dx = Tensor::zeros(in_batch);
                let dxd = dx.data_mut();
                for (g, &i) in dy.data().iter().zip(idx) {
                    dxd[i] = dxd[i] + *g;
                }
                dx
            }
            (LayerSpec::BatchNorm, Cache::Norm { xhat, inv_std }) => {
                let c = self.in_shape[0];
                let spatial: usize = self.in_shape[1..].iter().product();
                let m = T::cast_f64((n * spatial) as f64);
                let mut sum_dy = vec![T::zero(); c];
                let mut sum_dy_xhat = vec![T::zero(); c];
                for (j, (d, xh)) in dy
                    .data()
                    .chunks_exact(spatial)
                    .zip(xhat.chunks_exact(spatial))
                    .enumerate()
                {
                    let ch = j % c;
                    for (&d, &xh) in d.iter().zip(xh) {
                        sum_dy[ch] = sum_dy[ch] + d;
                        sum_dy_xhat[ch] = sum_dy_xhat[ch] + d * xh;
                    }
                }
                let [gamma, beta] = &mut self.params[..] else {
                    unreachable!()
                };
                for ch in 0..c {
                    gamma.grad[ch] = gamma.grad[ch] + sum_dy_xhat[ch];
                    beta.grad[ch] = beta.grad[ch] + sum_dy[ch];
                }
                let mut dx = dy;
                for (j, (d, xh)) in dx
                    .data_mut()
                    .chunks_exact_mut(spatial)
                    .zip(xhat.chunks_exact(spatial))
                    .enumerate()
                {
                    let ch = j % c;
                    let k = gamma.value[ch] * inv_std[ch] / m;
                    for (d, &xh) in d.iter_mut().zip(xh) {
                        *d = k * (m * *d - sum_dy[ch] - xh * sum_dy_xhat[ch]);
                    }
                }
                dx
            }
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                let mut dx = dy;
                dx.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v = *v * *m);
                dx
            }
            (LayerSpec::Dropout { .. }, Cache::Empty) => dy,
            (LayerSpec::Activation { function }, cache) => {
                let mut dx = dy;
                match (function, cache) {
                    (Activation::Relu, Cache::Input(x)) => {
                        dx.data_mut().iter_mut().zip(x.data()).for_each(|(g, &v)| {
                            if v <= T::zero() {
                                *g = T::zero()
                            }
                        });
                    }
                    (Activation::Sigmoid, Cache::Output(y)) => {
                        dx.data_mut()
                            .iter_mut()
                            .zip(y.data())
                            .for_each(|(g, &v)| *g = *g * v * (T::one() - v));
                    }
                    (Activation::Softmax, Cache::Output(y)) => {
                        let w = y.row_len();
                        for (grow, yrow) in dx.data_mut().chunks_exact_mut(w).zip(y.data().chunks_exact(w)) {
                            let dot: T = grow.iter().zip(yrow).map(|(g, v)| *g * *v).sum();
                            for (g, &v) in grow.iter_mut().zip(yrow) {
                                *g = v * (*g - dot);
                            }
                        }
                    }
                    _ => panic!("backward called without a matching forward_train"),
                }
                dx
            }
            _ => panic!("backward called without a matching forward_train"),
        }
    }

    fn dense_forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let LayerSpec::Dense { inputs, outputs } = self.spec else {
            unreachable!()
        };
        let n = x.batch();
        let (w, b) = (&self.params[0].value, &self.params[1].value);
        let mut y = Tensor::zeros(self.out_batch_shape(n));
        for row in y.data_mut().chunks_exact_mut(outputs) {
            row.copy_from_slice(b);
        }
        // Y = X Wᵀ + b
        T::gemm(
            n,
            inputs,
            outputs,
            T::one(),
            x.data(),
            inputs as isize,
            1,
            w,
            1,
            inputs as isize,
            T::one(),
            y.data_mut(),
            outputs as isize,
            1,
        );
        y
    }

    /// Batch im2col: a `(c*9) x (n*h*w)` matrix, sample `s` occupying
    /// columns `s*h*w .. (s+1)*h*w`.
    fn batch_cols(&self, x: &Tensor<T>) -> Vec<T> {
        let (c, h, w) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let hw = h * w;
        let n = x.batch();
        let ld = n * hw;
        let mut cols = vec![T::zero(); c * 9 * ld];
        for s in 0..n {
            im2col(&x.data()[s * c * hw..(s + 1) * c * hw], c, h, w, &mut cols, ld, s * hw);
        }
        cols
    }

    fn conv_forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let LayerSpec::Conv2d { filters } = self.spec else {
            unreachable!()
        };
        let hw = self.in_shape[1] * self.in_shape[2];
        let c9 = self.in_shape[0] * 9;
        let n = x.batch();
        let ld = n * hw;
        let (w, b) = (&self.params[0].value, &self.params[1].value);
        let cols = self.batch_cols(x);
        let mut out = vec![T::zero(); filters * ld];
        T::gemm(
            filters,
            c9,
            ld,
            T::one(),
            w,
            c9 as isize,
            1,
            &cols,
            ld as isize,
            1,
            T::zero(),
            &mut out,
            ld as isize,
            1,
        );
        let mut y = Tensor::zeros(self.out_batch_shape(n));
        for (s, ys) in y.data_mut().chunks_exact_mut(filters * hw).enumerate() {
            for (f, (dst, &bias)) in ys.chunks_exact_mut(hw).zip(b).enumerate() {
                let src = &out[f * ld + s * hw..][..hw];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = v + bias;
                }
            }
        }
        y
    }

    fn pool_forward(&self, x: &Tensor<T>) -> (Tensor<T>, Vec<usize>) {
        let (c, h, w) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let (oh, ow) = (h / 2, w / 2);
        let n = x.batch();
        let mut y = Tensor::zeros(self.out_batch_shape(n));
        let mut idx = vec![0usize; y.len()];
        let xd = x.data();
        let yd = y.data_mut();
        let mut o = 0;
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = base + 2 * oy * w + 2 * ox;
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                            if xd[i] > xd[best] {
                                best = i;
                            }
                        }
                        yd[o] = xd[best];
                        idx[o] = best;
                        o += 1;
                    }
                }
            }
        }
        (y, idx)
    }

    fn norm_infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let c = self.in_shape[0];
        let spatial: usize = self.in_shape[1..].iter().product();
        let eps = T::cast_f64(BN_EPSILON);
        let (gamma, beta) = (&self.params[0].value, &self.params[1].value);
        let (mean, var) = (&self.buffers[0], &self.buffers[1]);
        let mut y = x.clone();
        for (j, block) in y.data_mut().chunks_exact_mut(spatial).enumerate() {
            let ch = j % c;
            let scale = gamma[ch] / (var[ch] + eps).sqrt();
            for v in block {
                *v = (*v - mean[ch]) * scale + beta[ch];
            }
        }
        y
    }

    fn norm_train(&mut self, x: Tensor<T>) -> Tensor<T> {
        let c = self.in_shape[0];
        let spatial: usize = self.in_shape[1..].iter().product();
        let n = x.batch();
        let m = T::cast_f64((n * spatial) as f64);
        let eps = T::cast_f64(BN_EPSILON);
        let mut mean = vec![T::zero(); c];
        for (j, block) in x.data().chunks_exact(spatial).enumerate() {
            let ch = j % c;
            mean[ch] = mean[ch] + block.iter().copied().sum::<T>();
        }
        mean.iter_mut().for_each(|v| *v = *v / m);
        let mut var = vec![T::zero(); c];
        for (j, block) in x.data().chunks_exact(spatial).enumerate() {
            let ch = j % c;
            var[ch] = var[ch] + block.iter().map(|&v| (v - mean[ch]) * (v - mean[ch])).sum::<T>();
        }
        var.iter_mut().for_each(|v| *v = *v / m);
        let inv_std: Vec<T> = var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();

        let momentum = T::cast_f64(BN_MOMENTUM);
        for ch in 0..c {
            self.buffers[0][ch] = momentum * self.buffers[0][ch] + (T::one() - momentum) * mean[ch];
            self.buffers[1][ch] = momentum * self.buffers[1][ch] + (T::one() - momentum) * var[ch];
        }

        let (gamma, beta) = (&self.params[0].value, &self.params[1].value);
        let mut y = x;
        let mut xhat = vec![T::zero(); y.len()];
        for (j, (block, xh)) in y
            .data_mut()
            .chunks_exact_mut(spatial)
            .zip(xhat.chunks_exact_mut(spatial))
            .enumerate()
        {
            let ch = j % c;
            for (v, h) in block.iter_mut().zip(xh) {
                *h = (*v - mean[ch]) * inv_std[ch];
                *v = gamma[ch] * *h + beta[ch];
            }
        }
        self.cache = Cache::Norm { xhat, inv_std };
        y
    }
}

pub(crate) fn activate<T: Real>(function: Activation, x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    match function {
        Activation::Sigmoid => y
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = T::one() / (T::one() + (-*v).exp())),
        Activation::Relu => y.data_mut().iter_mut().for_each(|v| {
            if *v < T::zero() {
                *v = T::zero()
            }
        }),
        Activation::Softmax => {
            let w = y.row_len();
            for row in y.data_mut().chunks_exact_mut(w) {
                softmax_in_place(row);
            }
        }
    }
    y
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    row.iter_mut().for_each(|v| *v = *v / sum);
}

/// Unfolds a `c x h x w` image into the `(c*9) x (h*w)` matrix of 3x3
/// zero-padded neighbourhoods, written at column `offset` of a row-major
/// matrix with leading dimension `ld`.
fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, cols: &mut [T], ld: usize, offset: usize) {
    let hw = h * w;
    for ch in 0..c {
        let src = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ch * 9 + ky * 3 + kx) * ld + offset..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y + ky;
                    if sy == 0 || sy > h {
                        dst.fill(T::zero());
                        continue;
                    }
                    let line = &src[(sy - 1) * w..sy * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&line[..w - 1]);
                        }
                        1 => dst.copy_from_slice(line),
                        _ => {
                            dst[..w - 1].copy_from_slice(&line[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the image.
#[allow(clippy::too_many_arguments)]
fn col2im_add<T: Real>(cols: &[T], c: usize, h: usize, w: usize, dx: &mut [T], ld: usize, offset: usize) {
    let hw = h * w;
    for ch in 0..c {
        let img = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ch * 9 + ky * 3 + kx) * ld + offset..][..hw];
                for y in 0..h {
                    let sy = y + ky;
                    if sy == 0 || sy > h {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let line = &mut img[(sy - 1) * w..sy * w];
                    let (dst, src) = match kx {
                        0 => (&mut line[..w - 1], &src[1..]),
                        1 => (&mut line[..], src),
                        _ => (&mut line[1..], &src[..w - 1]),
                    };
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = *d + *s;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn im2col_center_tap_is_identity() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let mut cols = vec![0.0; 2 * 9 * 6];
        im2col(&x, 2, 2, 3, &mut cols, 6, 0);
        // tap (1,1) of channel 1 reproduces channel 1
        assert_eq!(&cols[(9 + 4) * 6..(9 + 5) * 6], &x[6..12]);
        // tap (0,0) of channel 0 at pixel (0,0) is padding
        assert_eq!(cols[0], 0.0);
    }

    #[test]
    fn maxpool_floors_odd_sizes() {
        let spec = LayerSpec::MaxPool2d;
        let out = spec.output_shape(&[1, 7, 7]).unwrap();
        assert_eq!(out, vec![1, 3, 3]);
        let mut rng = super::super::rng::seeded(0);
        let layer = Layer::<f64>::init(&spec, &[1, 7, 7], &out, &mut rng);
        let x = Tensor::new(vec![1, 1, 7, 7], (0..49).map(f64::from).collect()).unwrap();
        let y = layer.infer(&x);
        assert_eq!(y.data(), &[8.0, 10.0, 12.0, 22.0, 24.0, 26.0, 36.0, 38.0, 40.0]);
    }
}
