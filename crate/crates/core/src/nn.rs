//! Minimal 1-D neural network kernel: valid convolution, max pooling,
//! dense and transposed-convolution layers, tanh/sigmoid, MSE loss, their
//! analytic gradients, and the Adam optimizer. All arithmetic is `f64`.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel-major 2-D tensor; feature vectors use a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    length: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(channels: usize, length: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * length {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape ({channels}, {length})",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("tensor contains non-finite values".into()));
        }
        Ok(Self {
            channels,
            length,
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            channels: 1,
            length: data.len(),
            data,
        }
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            data: vec![0.0; channels * length],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, i: usize) -> f64 {
        self.data[c * self.length + i]
    }

    /// Same data viewed with a different shape.
    pub fn reshape(self, channels: usize, length: usize) -> Result<Self> {
        if channels * length != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape ({}, {}) to ({channels}, {length})",
                self.channels, self.length
            )));
        }
        Ok(Self {
            channels,
            length,
            data: self.data,
        })
    }

    fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.length..(c + 1) * self.length]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv1d,
    Tconv1d,
    Dense,
}

/// Weights and hyperparameters of one parametric layer.
///
/// Weight layouts (row-major):
/// - `Conv1d`: `(out, in, kernel)`
/// - `Tconv1d`: `(in, out, kernel)`
/// - `Dense`: `(out, in)`; `kernel` and `stride` are 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub kernel: usize,
    pub stride: usize,
    pub output_padding: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn conv1d(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            kind: LayerKind::Conv1d,
            in_dim: in_channels,
            out_dim: out_channels,
            kernel,
            stride: 1,
            output_padding: 0,
            weights: vec![0.0; in_channels * out_channels * kernel],
            biases: vec![0.0; out_channels],
        }
    }

    pub fn tconv1d(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        output_padding: usize,
    ) -> Self {
        Self {
            kind: LayerKind::Tconv1d,
            in_dim: in_channels,
            out_dim: out_channels,
            kernel,
            stride,
            output_padding,
            weights: vec![0.0; in_channels * out_channels * kernel],
            biases: vec![0.0; out_channels],
        }
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            in_dim: inputs,
            out_dim: outputs,
            kernel: 1,
            stride: 1,
            output_padding: 0,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv1d | LayerKind::Tconv1d => self.in_dim * self.kernel,
            LayerKind::Dense => self.in_dim,
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Uniform initialization in ±1/√fan_in for weights and biases.
    pub fn init_uniform(&mut self, rng: &mut impl Rng) {
        let bound = 1.0 / (self.fan_in() as f64).sqrt();
        for w in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ShapeMismatch(m));
        if self.in_dim == 0 || self.out_dim == 0 || self.kernel == 0 || self.stride == 0 {
            return bad(format!("{:?} layer has a zero dimension", self.kind));
        }
        let expected = match self.kind {
            LayerKind::Dense => {
                if self.kernel != 1 || self.stride != 1 || self.output_padding != 0 {
                    return bad("dense layer with convolution hyperparameters".into());
                }
                self.in_dim * self.out_dim
            }
            LayerKind::Conv1d => {
                if self.stride != 1 || self.output_padding != 0 {
                    return bad("conv1d supports stride 1 without output padding".into());
                }
                self.in_dim * self.out_dim * self.kernel
            }
            LayerKind::Tconv1d => {
                if self.output_padding > 3 || self.output_padding >= self.stride.max(self.kernel) {
                    return bad(format!("output_padding {} out of range", self.output_padding));
                }
                self.in_dim * self.out_dim * self.kernel
            }
        };
        if self.weights.len() != expected || self.biases.len() != self.out_dim {
            return bad(format!(
                "{:?} layer has {} weights / {} biases, expected {expected} / {}",
                self.kind,
                self.weights.len(),
                self.biases.len(),
                self.out_dim
            ));
        }
        if self.weights.iter().chain(&self.biases).any(|v| !v.is_finite()) {
            return bad("non-finite layer parameter".into());
        }
        Ok(())
    }

    fn expect(&self, kind: LayerKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::ShapeMismatch(format!(
                "expected a {kind:?} layer, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Parameter gradients, laid out like [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

fn shape_err<T>(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<T> {
    Err(Error::ShapeMismatch(format!("{what}: got {got:?}, expected {want:?}")))
}

/// Valid 1-D convolution, `out[c,i] = b[c] + Σ w[c,c',j]·x[c',i+j]`.
pub fn conv1d_forward(x: &Tensor, p: &LayerParams) -> Result<Tensor> {
    p.expect(LayerKind::Conv1d)?;
    if x.channels != p.in_dim || x.length < p.kernel {
        return shape_err("conv1d input", x.shape(), (p.in_dim, p.kernel.max(x.length)));
    }
    let k = p.kernel;
    let out_len = x.length - k + 1;
    let mut out = Vec::with_capacity(p.out_dim * out_len);
    for c in 0..p.out_dim {
        for i in 0..out_len {
            let mut acc = p.biases[c];
            for ci in 0..p.in_dim {
                let w = &p.weights[(c * p.in_dim + ci) * k..][..k];
                let xs = &x.channel(ci)[i..i + k];
                acc += w.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
            }
            out.push(acc);
        }
    }
    Ok(Tensor {
        channels: p.out_dim,
        length: out_len,
        data: out,
    })
}

pub fn conv1d_backward(x: &Tensor, p: &LayerParams, grad_out: &Tensor) -> Result<(Tensor, LayerGrads)> {
    p.expect(LayerKind::Conv1d)?;
    if x.channels != p.in_dim || x.length < p.kernel {
        return shape_err("conv1d input", x.shape(), (p.in_dim, p.kernel));
    }
    let k = p.kernel;
    let out_len = x.length - k + 1;
    if grad_out.shape() != (p.out_dim, out_len) {
        return shape_err("conv1d grad_out", grad_out.shape(), (p.out_dim, out_len));
    }
    let mut gx = vec![0.0; x.data.len()];
    let mut gw = vec![0.0; p.weights.len()];
    let mut gb = vec![0.0; p.out_dim];
    for c in 0..p.out_dim {
        let g = grad_out.channel(c);
        gb[c] = g.iter().sum();
        for ci in 0..p.in_dim {
            let base = (c * p.in_dim + ci) * k;
            let xs = x.channel(ci);
            for j in 0..k {
                let w = p.weights[base + j];
                let mut acc = 0.0;
                for (i, gi) in g.iter().enumerate() {
                    acc += gi * xs[i + j];
                    gx[ci * x.length + i + j] += gi * w;
                }
                gw[base + j] = acc;
            }
        }
    }
    Ok((
        Tensor {
            channels: x.channels,
            length: x.length,
            data: gx,
        },
        LayerGrads {
            weights: gw,
            biases: gb,
        },
    ))
}

/// Non-overlapping max pooling with window and stride `k`. A trailing
/// partial window is dropped; ties go to the lower index. Returns the
/// pooled tensor and, per output, the argmax position within its channel.
pub fn maxpool1d_forward(x: &Tensor, k: usize) -> Result<(Tensor, Vec<usize>)> {
    if k == 0 || x.length < k {
        return shape_err("maxpool input", x.shape(), (x.channels, k));
    }
    let out_len = x.length / k;
    let mut out = Vec::with_capacity(x.channels * out_len);
    let mut idx = Vec::with_capacity(x.channels * out_len);
    for c in 0..x.channels {
        let xs = x.channel(c);
        for o in 0..out_len {
            let mut best = o * k;
            for i in o * k + 1..(o + 1) * k {
                if xs[i] > xs[best] {
                    best = i;
                }
            }
            out.push(xs[best]);
            idx.push(best);
        }
    }
    Ok((
        Tensor {
            channels: x.channels,
            length: out_len,
            data: out,
        },
        idx,
    ))
}

/// Routes each pooled gradient back to the argmax position it came from.
pub fn maxpool1d_backward(indices: &[usize], grad_out: &Tensor, input_length: usize) -> Result<Tensor> {
    if indices.len() != grad_out.data.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} pooling indices for {} gradients",
            indices.len(),
            grad_out.data.len()
        )));
    }
    let mut gx = vec![0.0; grad_out.channels * input_length];
    for (n, (&i, &g)) in indices.iter().zip(&grad_out.data).enumerate() {
        let c = n / grad_out.length;
        if i >= input_length {
            return Err(Error::ShapeMismatch(format!(
                "pooling index {i} beyond input length {input_length}"
            )));
        }
        gx[c * input_length + i] += g;
    }
    Ok(Tensor {
        channels: grad_out.channels,
        length: input_length,
        data: gx,
    })
}

/// `W·x + b`, treating `x` as a flat feature vector.
pub fn dense_forward(x: &Tensor, p: &LayerParams) -> Result<Tensor> {
    p.expect(LayerKind::Dense)?;
    if x.data.len() != p.in_dim {
        return shape_err("dense input", (1, x.data.len()), (1, p.in_dim));
    }
    let out = (0..p.out_dim)
        .map(|m| {
            let row = &p.weights[m * p.in_dim..(m + 1) * p.in_dim];
            p.biases[m] + row.iter().zip(&x.data).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect();
    Ok(Tensor::vector(out))
}

/// Gradient w.r.t. the input is returned with the input's shape.
pub fn dense_backward(x: &Tensor, p: &LayerParams, grad_out: &Tensor) -> Result<(Tensor, LayerGrads)> {
    p.expect(LayerKind::Dense)?;
    if x.data.len() != p.in_dim || grad_out.data.len() != p.out_dim {
        return shape_err("dense backward", (x.data.len(), grad_out.data.len()), (p.in_dim, p.out_dim));
    }
    let mut gx = vec![0.0; p.in_dim];
    let mut gw = vec![0.0; p.weights.len()];
    for (m, &g) in grad_out.data.iter().enumerate() {
        let row = &p.weights[m * p.in_dim..(m + 1) * p.in_dim];
        for n in 0..p.in_dim {
            gw[m * p.in_dim + n] = g * x.data[n];
            gx[n] += g * row[n];
        }
    }
    Ok((
        Tensor {
            channels: x.channels,
            length: x.length,
            data: gx,
        },
        LayerGrads {
            weights: gw,
            biases: grad_out.data.clone(),
        },
    ))
}

/// Output length of a transposed convolution.
pub fn tconv1d_output_len(input_len: usize, kernel: usize, stride: usize, output_padding: usize) -> usize {
    (input_len - 1) * stride + kernel + output_padding
}

/// Transposed convolution: every input value scatters a scaled kernel at
/// stride offsets, `out[c, s·t + j] += w[c',c,j]·x[c',t]`. The trailing
/// `output_padding` positions receive only the bias.
pub fn tconv1d_forward(x: &Tensor, p: &LayerParams) -> Result<Tensor> {
    p.expect(LayerKind::Tconv1d)?;
    if x.channels != p.in_dim || x.length == 0 {
        return shape_err("tconv1d input", x.shape(), (p.in_dim, x.length.max(1)));
    }
    let (k, s) = (p.kernel, p.stride);
    let out_len = tconv1d_output_len(x.length, k, s, p.output_padding);
    let mut out = vec![0.0; p.out_dim * out_len];
    for c in 0..p.out_dim {
        out[c * out_len..(c + 1) * out_len].fill(p.biases[c]);
    }
    for ci in 0..p.in_dim {
        let xs = x.channel(ci);
        for c in 0..p.out_dim {
            let w = &p.weights[(ci * p.out_dim + c) * k..][..k];
            let o = &mut out[c * out_len..(c + 1) * out_len];
            for (t, &xv) in xs.iter().enumerate() {
                for (j, &wv) in w.iter().enumerate() {
                    o[s * t + j] += wv * xv;
                }
            }
        }
    }
    Ok(Tensor {
        channels: p.out_dim,
        length: out_len,
        data: out,
    })
}

pub fn tconv1d_backward(x: &Tensor, p: &LayerParams, grad_out: &Tensor) -> Result<(Tensor, LayerGrads)> {
    p.expect(LayerKind::Tconv1d)?;
    if x.channels != p.in_dim || x.length == 0 {
        return shape_err("tconv1d input", x.shape(), (p.in_dim, 1));
    }
    let (k, s) = (p.kernel, p.stride);
    let out_len = tconv1d_output_len(x.length, k, s, p.output_padding);
    if grad_out.shape() != (p.out_dim, out_len) {
        return shape_err("tconv1d grad_out", grad_out.shape(), (p.out_dim, out_len));
    }
    let mut gx = vec![0.0; x.data.len()];
    let mut gw = vec![0.0; p.weights.len()];
    let gb = (0..p.out_dim).map(|c| grad_out.channel(c).iter().sum()).collect();
    for ci in 0..p.in_dim {
        let xs = x.channel(ci);
        for c in 0..p.out_dim {
            let base = (ci * p.out_dim + c) * k;
            let g = grad_out.channel(c);
            for (t, &xv) in xs.iter().enumerate() {
                for j in 0..k {
                    let gij = g[s * t + j];
                    gw[base + j] += xv * gij;
                    gx[ci * x.length + t] += p.weights[base + j] * gij;
                }
            }
        }
    }
    Ok((
        Tensor {
            channels: x.channels,
            length: x.length,
            data: gx,
        },
        LayerGrads {
            weights: gw,
            biases: gb,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn activation_forward(x: &Tensor, kind: Activation) -> Tensor {
    let f: fn(f64) -> f64 = match kind {
        Activation::Tanh => f64::tanh,
        Activation::Sigmoid => sigmoid,
    };
    Tensor {
        channels: x.channels,
        length: x.length,
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

/// Backward pass expressed through the forward output `y`.
pub fn activation_backward(y: &Tensor, grad_out: &Tensor, kind: Activation) -> Result<Tensor> {
    if y.data.len() != grad_out.data.len() {
        return shape_err("activation grad_out", grad_out.shape(), y.shape());
    }
    let data = y
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&y, &g)| match kind {
            Activation::Tanh => g * (1.0 - y * y),
            Activation::Sigmoid => g * y * (1.0 - y),
        })
        .collect();
    Ok(Tensor {
        channels: y.channels,
        length: y.length,
        data,
    })
}

/// Mean squared error over all elements and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.data.len() != target.data.len() || pred.data.is_empty() {
        return shape_err("mse target", target.shape(), pred.shape());
    }
    let n = pred.data.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((
        loss / n,
        Tensor {
            channels: pred.channels,
            length: pred.length,
            data: grad,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Serialized parameter set: layers in declaration order plus optimizer
/// state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layers: Vec<LayerParams>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::MalformedArtifact {
                path: path.to_path_buf(),
                message: format!("unsupported checkpoint version {}", ck.format_version),
            });
        }
        for layer in &ck.layers {
            layer.validate()?;
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_and_windows() {
        let mut p = LayerParams::conv1d(1, 1, 1);
        p.weights = vec![1.0];
        let x = Tensor::vector(vec![1.0, -2.0, 3.5]);
        assert_eq!(conv1d_forward(&x, &p).unwrap(), x);

        let mut p = LayerParams::conv1d(1, 1, 4);
        p.weights = vec![1.0; 4];
        let x = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(conv1d_forward(&x, &p).unwrap().data(), &[10.0, 14.0]);

        let x = Tensor::zeros(1, 40);
        assert_eq!(conv1d_forward(&x, &p).unwrap().length(), 37);
    }

    #[test]
    fn conv_shape_errors() {
        let p = LayerParams::conv1d(2, 1, 4);
        assert!(matches!(conv1d_forward(&Tensor::zeros(1, 10), &p), Err(Error::ShapeMismatch(_))));
        assert!(conv1d_forward(&Tensor::zeros(2, 3), &p).is_err());
        let d = LayerParams::dense(3, 2);
        assert!(conv1d_forward(&Tensor::zeros(1, 3), &d).is_err());
    }

    #[test]
    fn conv_backward_simple() {
        let mut p = LayerParams::conv1d(1, 1, 1);
        p.weights = vec![0.7];
        let x = Tensor::vector(vec![3.0]);
        let (gx, g) = conv1d_backward(&x, &p, &Tensor::vector(vec![2.0])).unwrap();
        assert_eq!(g.weights, [6.0]);
        assert_eq!(g.biases, [2.0]);
        assert!((gx.data()[0] - 1.4).abs() < 1e-15);

        let p = LayerParams::conv1d(2, 3, 4);
        let x = Tensor::new(2, 9, (0..18).map(|v| v as f64).collect()).unwrap();
        let (gx, g) = conv1d_backward(&x, &p, &Tensor::zeros(3, 6)).unwrap();
        assert!(gx.data().iter().chain(&g.weights).chain(&g.biases).all(|&v| v == 0.0));
    }

    #[test]
    fn maxpool_examples() {
        let x = Tensor::vector(vec![1.0, 3.0, 2.0, 2.0, 9.0]);
        let (y, idx) = maxpool1d_forward(&x, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
        assert_eq!(idx, [1, 2]);

        let (y, idx) = maxpool1d_forward(&Tensor::vector(vec![4.0; 6]), 2).unwrap();
        assert_eq!(y.data(), &[4.0; 3]);
        assert_eq!(idx, [0, 2, 4]);

        assert_eq!(maxpool1d_forward(&Tensor::zeros(2, 37), 2).unwrap().0.shape(), (2, 18));
        assert!(maxpool1d_forward(&Tensor::zeros(1, 1), 2).is_err());
    }

    #[test]
    fn maxpool_backward_routes() {
        let g = maxpool1d_backward(&[1, 2], &Tensor::vector(vec![1.0, 1.0]), 5).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0, 1.0, 0.0, 0.0]);
        let z = maxpool1d_backward(&[1, 2], &Tensor::zeros(1, 2), 5).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        assert!(maxpool1d_backward(&[1], &Tensor::zeros(1, 2), 5).is_err());
    }

    #[test]
    fn dense_examples() {
        let mut p = LayerParams::dense(2, 2);
        p.weights = vec![1.0, 0.0, 0.0, 1.0];
        let x = Tensor::vector(vec![0.3, -0.4]);
        assert_eq!(dense_forward(&x, &p).unwrap(), x);
        p.weights = vec![1.0, 2.0, 3.0, 4.0];
        p.biases = vec![0.0, 1.0];
        let out = dense_forward(&Tensor::vector(vec![1.0, 1.0]), &p).unwrap();
        assert_eq!(out.data(), &[3.0, 8.0]);
        let p = LayerParams::dense(28, 2);
        assert_eq!(dense_forward(&Tensor::zeros(4, 7), &p).unwrap().length(), 2);
        assert!(dense_forward(&Tensor::zeros(1, 27), &p).is_err());
    }

    #[test]
    fn tconv_examples() {
        let mut p = LayerParams::tconv1d(1, 1, 4, 2, 0);
        p.weights = vec![1.0; 4];
        assert_eq!(tconv1d_forward(&Tensor::vector(vec![1.0]), &p).unwrap().data(), &[1.0; 4]);

        p.weights = vec![1.0, 0.0, 0.0, 0.0];
        let y = tconv1d_forward(&Tensor::vector(vec![1.0, 2.0]), &p).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0]);

        let mut p = LayerParams::tconv1d(1, 1, 4, 2, 2);
        p.biases = vec![0.25];
        let y = tconv1d_forward(&Tensor::vector(vec![1.0; 7]), &p).unwrap();
        assert_eq!(y.length(), 18);
        assert_eq!(tconv1d_output_len(18, 4, 2, 2), 40);
        // trailing padding positions hold the bias only
        p.weights = vec![1.0; 4];
        let y = tconv1d_forward(&Tensor::vector(vec![1.0; 7]), &p).unwrap();
        assert_eq!(&y.data()[16..], &[0.25, 0.25]);
    }

    #[test]
    fn activations() {
        let x = Tensor::vector(vec![0.0]);
        assert_eq!(activation_forward(&x, Activation::Tanh).data(), &[0.0]);
        assert_eq!(activation_forward(&x, Activation::Sigmoid).data(), &[0.5]);
        let y = activation_forward(&x, Activation::Tanh);
        let g = activation_backward(&y, &Tensor::vector(vec![1.0]), Activation::Tanh).unwrap();
        assert_eq!(g.data(), &[1.0]);
        let big = activation_forward(&Tensor::vector(vec![-800.0, 800.0]), Activation::Sigmoid);
        assert!(big.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mse_examples() {
        let t = Tensor::vector(vec![0.5; 40]);
        let (l, g) = mse_loss(&t, &t).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let p = Tensor::vector(vec![0.6; 40]);
        let (l, _) = mse_loss(&p, &t).unwrap();
        assert!((l - 0.01).abs() < 1e-15);
        assert!(mse_loss(&Tensor::vector(vec![0.0; 39]), &t).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_still() {
        let mut w = vec![0.3, -1.2];
        let mut s = AdamState::new(2, 5e-4);
        adam_step(&mut w, &[0.0, 0.0], &mut s).unwrap();
        assert_eq!(w, [0.3, -1.2]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_magnitude() {
        for g in [1e-3, 0.5, 42.0, -7.0] {
            let mut w = vec![1.0];
            let mut s = AdamState::new(1, 5e-4);
            adam_step(&mut w, &[g], &mut s).unwrap();
            let expected = 1.0 - 5e-4 * g.signum() * g.abs() / (g.abs() + 1e-8);
            assert!((w[0] - expected).abs() < 1e-15);
            assert!(((1.0 - w[0]).abs() - 5e-4).abs() < 1e-8);
        }
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut w = vec![1.0];
        let mut s = AdamState::new(1, 5e-4);
        let mut prev = w[0] * w[0];
        for _ in 0..200 {
            let g = [2.0 * w[0]];
            adam_step(&mut w, &g, &mut s).unwrap();
            let loss = w[0] * w[0];
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn adam_lr_zero_is_identity_and_rejects_nan() {
        let mut w = vec![0.1, 0.2, 0.3];
        let mut s = AdamState::new(3, 0.0);
        adam_step(&mut w, &[1.0, -2.0, 3.0], &mut s).unwrap();
        assert_eq!(w, [0.1, 0.2, 0.3]);
        assert!(matches!(
            adam_step(&mut w, &[1.0, f64::NAN, 0.0], &mut s),
            Err(Error::NonFiniteGradient { index: 1 })
        ));
        assert!(adam_step(&mut w, &[1.0], &mut s).is_err());
    }

    #[test]
    fn layer_validation() {
        let mut p = LayerParams::conv1d(1, 2, 4);
        assert!(p.validate().is_ok());
        p.weights.pop();
        assert!(p.validate().is_err());
        assert!(LayerParams::tconv1d(4, 2, 4, 2, 2).validate().is_ok());
        assert!(LayerParams::tconv1d(4, 2, 4, 2, 4).validate().is_err());
    }
}
