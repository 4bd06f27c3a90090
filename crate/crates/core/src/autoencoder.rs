//! Convolutional autoencoder mapping 40-point pitch contours to a 2-D latent
//! space and back.
//!
//! Encoder: conv(1→2, k4) → maxpool(2) → tanh → conv(2→4, k4) → maxpool(2)
//! → tanh → flatten(28) → dense(28→2). The latent layer is linear.
//!
//! Decoder: dense(2→28) → tanh → reshape(4, 7) → tconv(4→2, k4, s2, op2) →
//! tanh → tconv(2→1, k4, s2, op2) → sigmoid.
//!
//! Lengths: 40 → 37 → 18 → 15 → 7 (×4 = 28) → 2, and 2 → 28 → 7 → 18 → 40.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    activation_backward, activation_forward, adam_step, conv1d_backward, conv1d_forward,
    dense_backward, dense_forward, maxpool1d_backward, maxpool1d_forward, mse_loss,
    tconv1d_backward, tconv1d_forward, tconv1d_output_len, Activation, AdamState, Checkpoint,
    LayerKind, LayerParams, Tensor, CHECKPOINT_FORMAT_VERSION,
};
use crate::pitch::{NormalizedContour, CONTOUR_LEN};

pub const LATENT_DIM: usize = 2;
const KERNEL: usize = 4;
const POOL: usize = 2;
const ENC_CHANNELS: [usize; 2] = [2, 4];
const DEC_STRIDE: usize = 2;
const DEC_OUTPUT_PADDING: usize = 2;

/// Feature-map lengths through the encoder: input, conv1, pool1, conv2, pool2.
pub const ENCODER_LENGTHS: [usize; 5] = [40, 37, 18, 15, 7];
pub const FLAT_DIM: usize = 28;
/// Feature-map lengths through the decoder after the reshape.
pub const DECODER_LENGTHS: [usize; 3] = [7, 18, 40];

// Indices into `Model::layers`.
const ENC_CONV1: usize = 0;
const ENC_CONV2: usize = 1;
const ENC_DENSE: usize = 2;
const DEC_DENSE: usize = 3;
const DEC_TCONV1: usize = 4;
const DEC_TCONV2: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 60,
            lr: 5e-4,
            seed: 0,
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub word_id: String,
    pub syllable_index: usize,
    pub z: [f64; LATENT_DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<LayerParams>,
    adam: AdamState,
}

/// Intermediate activations of one forward pass.
struct Trace {
    x: Tensor,
    c1: Tensor,
    i1: Vec<usize>,
    a1: Tensor,
    c2: Tensor,
    i2: Vec<usize>,
    a2: Tensor,
    z: Tensor,
    a3: Tensor,
    a4: Tensor,
    y: Tensor,
}

fn architecture() -> Vec<LayerParams> {
    let flat = ENC_CHANNELS[1] * ENCODER_LENGTHS[4];
    vec![
        LayerParams::conv1d(1, ENC_CHANNELS[0], KERNEL),
        LayerParams::conv1d(ENC_CHANNELS[0], ENC_CHANNELS[1], KERNEL),
        LayerParams::dense(flat, LATENT_DIM),
        LayerParams::dense(LATENT_DIM, flat),
        LayerParams::tconv1d(ENC_CHANNELS[1], ENC_CHANNELS[0], KERNEL, DEC_STRIDE, DEC_OUTPUT_PADDING),
        LayerParams::tconv1d(ENC_CHANNELS[0], 1, KERNEL, DEC_STRIDE, DEC_OUTPUT_PADDING),
    ]
}

/// Checks the dimension chain implied by the layer hyperparameters.
fn assert_shape_chain(layers: &[LayerParams]) {
    let conv = |l: usize| l - KERNEL + 1;
    let pool = |l: usize| l / POOL;
    let enc = [
        CONTOUR_LEN,
        conv(CONTOUR_LEN),
        pool(conv(CONTOUR_LEN)),
        conv(pool(conv(CONTOUR_LEN))),
        pool(conv(pool(conv(CONTOUR_LEN)))),
    ];
    assert_eq!(enc, ENCODER_LENGTHS, "encoder length chain");
    assert_eq!(ENC_CHANNELS[1] * enc[4], FLAT_DIM, "flatten size");
    let d1 = tconv1d_output_len(enc[4], KERNEL, DEC_STRIDE, DEC_OUTPUT_PADDING);
    let d2 = tconv1d_output_len(d1, KERNEL, DEC_STRIDE, DEC_OUTPUT_PADDING);
    assert_eq!([enc[4], d1, d2], DECODER_LENGTHS, "decoder length chain");
    assert_eq!(layers[ENC_DENSE].in_dim, FLAT_DIM);
    assert_eq!(layers[ENC_DENSE].out_dim, LATENT_DIM);
    assert_eq!(layers[DEC_DENSE].out_dim, FLAT_DIM);
}

/// Builds the autoencoder with uniform ±1/√fan_in initialization drawn from
/// a ChaCha stream seeded by `seed`.
pub fn build_model(seed: u64) -> Model {
    let mut layers = architecture();
    assert_shape_chain(&layers);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut layers {
        layer.init_uniform(&mut rng);
    }
    let n = layers.iter().map(LayerParams::num_params).sum();
    let model = Model {
        layers,
        adam: AdamState::new(n, TrainingConfig::default().lr),
    };
    let probe = model.forward(&[0.5; CONTOUR_LEN]).expect("shape chain");
    assert_eq!(probe.z.data().len(), LATENT_DIM);
    assert_eq!(probe.y.shape(), (1, CONTOUR_LEN));
    model
}

impl Model {
    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LayerParams::num_params).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a model with {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut rest = flat;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn forward(&self, contour: &[f64]) -> Result<Trace> {
        if contour.len() != CONTOUR_LEN {
            return Err(Error::ShapeMismatch(format!(
                "contour of length {}, expected {CONTOUR_LEN}",
                contour.len()
            )));
        }
        let x = Tensor::vector(contour.to_vec());
        let c1 = conv1d_forward(&x, &self.layers[ENC_CONV1])?;
        let (p1, i1) = maxpool1d_forward(&c1, POOL)?;
        let a1 = activation_forward(&p1, Activation::Tanh);
        let c2 = conv1d_forward(&a1, &self.layers[ENC_CONV2])?;
        let (p2, i2) = maxpool1d_forward(&c2, POOL)?;
        let a2 = activation_forward(&p2, Activation::Tanh);
        let z = dense_forward(&a2, &self.layers[ENC_DENSE])?;
        let (a3, a4, y) = self.decode_trace(&z)?;
        Ok(Trace {
            x,
            c1,
            i1,
            a1,
            c2,
            i2,
            a2,
            z,
            a3,
            a4,
            y,
        })
    }

    fn decode_trace(&self, z: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let d1 = dense_forward(z, &self.layers[DEC_DENSE])?;
        let a3 = activation_forward(&d1, Activation::Tanh).reshape(ENC_CHANNELS[1], DECODER_LENGTHS[0])?;
        let t1 = tconv1d_forward(&a3, &self.layers[DEC_TCONV1])?;
        let a4 = activation_forward(&t1, Activation::Tanh);
        let t2 = tconv1d_forward(&a4, &self.layers[DEC_TCONV2])?;
        let y = activation_forward(&t2, Activation::Sigmoid);
        Ok((a3, a4, y))
    }

    /// Loss of one sample and its gradient, accumulated into `grad`.
    fn backward(&self, tr: &Trace, grad: &mut [f64]) -> Result<f64> {
        let (loss, g_y) = mse_loss(&tr.y, &tr.x)?;
        let g_t2 = activation_backward(&tr.y, &g_y, Activation::Sigmoid)?;
        let (g_a4, gl5) = tconv1d_backward(&tr.a4, &self.layers[DEC_TCONV2], &g_t2)?;
        let g_t1 = activation_backward(&tr.a4, &g_a4, Activation::Tanh)?;
        let (g_a3, gl4) = tconv1d_backward(&tr.a3, &self.layers[DEC_TCONV1], &g_t1)?;
        let g_d1 = activation_backward(&tr.a3, &g_a3, Activation::Tanh)?;
        let (g_z, gl3) = dense_backward(&tr.z, &self.layers[DEC_DENSE], &g_d1)?;
        let (g_a2, gl2) = dense_backward(&tr.a2, &self.layers[ENC_DENSE], &g_z)?;
        let g_p2 = activation_backward(&tr.a2, &g_a2, Activation::Tanh)?;
        let g_c2 = maxpool1d_backward(&tr.i2, &g_p2, tr.c2.length())?;
        let (g_a1, gl1) = conv1d_backward(&tr.a1, &self.layers[ENC_CONV2], &g_c2)?;
        let g_p1 = activation_backward(&tr.a1, &g_a1, Activation::Tanh)?;
        let g_c1 = maxpool1d_backward(&tr.i1, &g_p1, tr.c1.length())?;
        let (_, gl0) = conv1d_backward(&tr.x, &self.layers[ENC_CONV1], &g_c1)?;

        let mut offset = 0;
        for g in [gl0, gl1, gl2, gl3, gl4, gl5] {
            for v in g.weights.iter().chain(&g.biases) {
                grad[offset] += v;
                offset += 1;
            }
        }
        Ok(loss)
    }

    /// Mean per-sample MSE over `batch` and its gradient w.r.t. [`Model::params`].
    pub fn loss_and_grad(&self, batch: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        let mut grad = vec![0.0; self.num_params()];
        let mut loss = 0.0;
        for x in batch {
            let tr = self.forward(x)?;
            loss += self.backward(&tr, &mut grad)?;
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((loss * scale, grad))
    }

    /// Mean per-sample MSE over `batch`.
    pub fn loss(&self, batch: &[&[f64]]) -> Result<f64> {
        let mut total = 0.0;
        for x in batch {
            let tr = self.forward(x)?;
            total += mse_loss(&tr.y, &tr.x)?.0;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    pub fn encode_values(&self, contour: &[f64]) -> Result<[f64; LATENT_DIM]> {
        let z = self.forward(contour)?.z;
        Ok([z.data()[0], z.data()[1]])
    }

    pub fn encode(&self, contour: &NormalizedContour) -> Result<LatentPoint> {
        Ok(LatentPoint {
            word_id: contour.word_id.clone(),
            syllable_index: contour.syllable_index,
            z: self.encode_values(contour.values())?,
        })
    }

    /// Decodes a latent point to a contour with values in (0, 1).
    pub fn decode(&self, z: [f64; LATENT_DIM]) -> Vec<f64> {
        let (_, _, y) = self
            .decode_trace(&Tensor::vector(z.to_vec()))
            .expect("decoder shapes are fixed at construction");
        y.into_data()
    }

    pub fn reconstruct(&self, contour: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(contour)?.y.into_data())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            layers: self.layers.clone(),
            adam: Some(self.adam.clone()),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let expected = architecture();
        let matches = ck.layers.len() == expected.len()
            && ck.layers.iter().zip(&expected).all(|(a, b)| {
                a.kind == b.kind
                    && a.in_dim == b.in_dim
                    && a.out_dim == b.out_dim
                    && a.kernel == b.kernel
                    && a.stride == b.stride
                    && a.output_padding == b.output_padding
            });
        if !matches {
            return Err(Error::ShapeMismatch("checkpoint does not match the autoencoder architecture".into()));
        }
        for l in &ck.layers {
            l.validate()?;
        }
        let n: usize = ck.layers.iter().map(LayerParams::num_params).sum();
        let adam = match ck.adam {
            Some(a) if a.m.len() == n && a.v.len() == n => a,
            Some(_) => return Err(Error::ShapeMismatch("optimizer state size mismatch".into())),
            None => AdamState::new(n, TrainingConfig::default().lr),
        };
        Ok(Self {
            layers: ck.layers,
            adam,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}

/// Layer kinds in declaration order, for display.
pub fn layer_kinds(model: &Model) -> Vec<LayerKind> {
    model.layers.iter().map(|l| l.kind).collect()
}

/// Trains with mini-batch Adam on seeded shuffles. Returns the trained
/// model and the mean per-sample training MSE of each epoch.
pub fn train(
    mut model: Model,
    contours: &[NormalizedContour],
    cfg: &TrainingConfig,
) -> Result<(Model, Vec<f64>)> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be at least 1".into()));
    }
    if contours.is_empty() {
        return Err(Error::Config("no contours to train on".into()));
    }
    model.adam.lr = cfg.lr;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..contours.len()).collect();
    let mut params = model.params();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| contours[i].values()).collect();
            let (loss, grad) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam_step(&mut params, &grad, &mut model.adam)?;
            model.set_params(&params)?;
        }
        let mean = epoch_loss / contours.len() as f64;
        log::debug!("epoch {epoch}: mse {mean:.6}");
        history.push(mean);
    }
    Ok((model, history))
}
