//! The dual-conditional VAE.
//!
//! The class label enters the network three ways: one-hot concatenated to
//! the encoder input, one-hot concatenated to the latent code at the decoder
//! input, and as the selector of per-class affine parameters in the
//! conditional batch-norm layers.
//!
//! Encoder: `[x ‖ onehot(y)] → (Linear → LeakyReLU)* → Linear → Norm →
//! LeakyReLU`, then twin linear heads for `μ` and `log σ²`. Decoder:
//! `[z ‖ onehot(y)]` through the same hidden pattern, then a linear output
//! layer with a logistic activation (features live in `[0, 1]`).

mod checkpoint;
mod train;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{loss, train, EpochLoss, LossBreakdown, TrainOutcome};

use crate::error::{Error, Result};
use crate::nn::cost::{ArchDescriptor, ComponentSpec, LayerSpec};
use crate::nn::layers::{check_labels, DEFAULT_LEAKY_SLOPE, DEFAULT_NORM_EPS, DEFAULT_NORM_MOMENTUM};
use crate::nn::loss::{LOGVAR_MAX, LOGVAR_MIN};
use crate::nn::{he_init, one_hot, CbnParamBank, Matrix, NormBatchStats, ParamId, ParamStore, Tape, Var};
use crate::seed::child_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbnPlacement {
    DecoderOnly,
    EncoderAndDecoder,
}

/// Conditional normalization (one affine pair per class) or plain batch
/// normalization (one shared pair). `Plain` gives the standard CVAE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Conditional,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub latent_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_weight: f64,
    pub cbn_placement: CbnPlacement,
    pub norm: NormKind,
    pub leaky_slope: f64,
    pub norm_eps: f64,
    pub norm_momentum: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 123,
            num_classes: 5,
            latent_dim: 32,
            hidden_widths: vec![60; 4],
            lr: 1e-4,
            epochs: 120,
            batch_size: 128,
            kl_weight: 1.0,
            cbn_placement: CbnPlacement::EncoderAndDecoder,
            norm: NormKind::Conditional,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            norm_eps: DEFAULT_NORM_EPS,
            norm_momentum: DEFAULT_NORM_MOMENTUM,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(feature_dim: usize, num_classes: usize) -> Self {
        Self {
            feature_dim,
            num_classes,
            ..Self::default()
        }
    }

    pub fn encoder_input_dim(&self) -> usize {
        self.feature_dim + self.num_classes
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.latent_dim + self.num_classes
    }

    fn norm_classes(&self) -> usize {
        match self.norm {
            NormKind::Conditional => self.num_classes,
            NormKind::Plain => 1,
        }
    }

    fn encoder_has_norm(&self) -> bool {
        self.cbn_placement == CbnPlacement::EncoderAndDecoder
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("feature_dim", self.feature_dim),
            ("num_classes", self.num_classes),
            ("latent_dim", self.latent_dim),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::invalid("hidden_widths must be nonempty with every width >= 1"));
        }
        if !(self.lr > 0.0) || !(self.kl_weight >= 0.0) {
            return Err(Error::invalid("lr must be > 0 and kl_weight >= 0"));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::invalid("leaky_slope must be in [0, 1)"));
        }
        if !(self.norm_eps > 0.0) || !(self.norm_momentum > 0.0 && self.norm_momentum < 1.0) {
            return Err(Error::invalid("norm_eps must be > 0 and norm_momentum in (0, 1)"));
        }
        Ok(())
    }

    /// Architecture descriptor for parameter/FLOP accounting.
    pub fn arch(&self) -> ArchDescriptor {
        let last = *self.hidden_widths.last().unwrap_or(&0);
        let norm = LayerSpec::Norm {
            width: last,
            classes: self.norm_classes(),
        };
        let stack = |input: usize| {
            let mut layers = Vec::new();
            let mut prev = input;
            for &w in &self.hidden_widths {
                layers.push(LayerSpec::Linear { input: prev, output: w });
                prev = w;
            }
            layers
        };

        let mut enc = stack(self.encoder_input_dim());
        if self.encoder_has_norm() {
            enc.push(norm);
        }
        enc.push(LayerSpec::Linear {
            input: last,
            output: self.latent_dim,
        });
        enc.push(LayerSpec::Linear {
            input: last,
            output: self.latent_dim,
        });

        let mut dec = stack(self.decoder_input_dim());
        dec.push(norm);
        dec.push(LayerSpec::Linear {
            input: last,
            output: self.feature_dim,
        });

        ArchDescriptor {
            components: vec![
                ComponentSpec {
                    name: "encoder".into(),
                    layers: enc,
                },
                ComponentSpec {
                    name: "decoder".into(),
                    layers: dec,
                },
            ],
        }
    }
}

/// Whether normalization layers use batch statistics (and the gradient
/// flows through them) or their running averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct Dense {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct NormLayer {
    name: String,
    gamma: ParamId,
    beta: ParamId,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Stack {
    hidden: Vec<Dense>,
    norm: Option<NormLayer>,
}

/// Identifies a normalization layer for running-statistics updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormSlot {
    Encoder,
    Decoder,
}

/// Tape handles produced by one forward pass.
pub struct ForwardPass {
    pub input: Var,
    pub mu: Var,
    /// Clamped `log σ²`.
    pub logvar: Var,
    pub z: Var,
    pub x_hat: Var,
    pub norm_stats: Vec<(NormSlot, NormBatchStats)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct C2bnVae {
    config: ModelConfig,
    params: ParamStore,
    encoder: Stack,
    enc_mu: Dense,
    enc_logvar: Dense,
    decoder: Stack,
    dec_out: Dense,
}

impl C2bnVae {
    /// He-initialized weights, zero biases, identity affine, unit running
    /// variance. Deterministic in `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = child_rng(config.seed, "model-init");
        let mut params = ParamStore::new();
        let norm_classes = config.norm_classes();

        let mut dense = |params: &mut ParamStore, name: &str, input: usize, output: usize| Dense {
            weight: params.add(format!("{name}.weight"), he_init(input, input, output, &mut rng)),
            bias: params.add(format!("{name}.bias"), Matrix::zeros(1, output)),
        };
        let norm = |params: &mut ParamStore, name: &str, width: usize| NormLayer {
            name: name.to_string(),
            gamma: params.add(format!("{name}.gamma"), Matrix::filled(norm_classes, width, 1.0)),
            beta: params.add(format!("{name}.beta"), Matrix::zeros(norm_classes, width)),
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        };

        let last = *config.hidden_widths.last().expect("validated nonempty");

        let mut enc_hidden = Vec::new();
        let mut prev = config.encoder_input_dim();
        for (i, &w) in config.hidden_widths.iter().enumerate() {
            enc_hidden.push(dense(&mut params, &format!("encoder.hidden{i}"), prev, w));
            prev = w;
        }
        let enc_norm = config
            .encoder_has_norm()
            .then(|| norm(&mut params, "encoder.norm", last));
        let enc_mu = dense(&mut params, "encoder.mu", last, config.latent_dim);
        let enc_logvar = dense(&mut params, "encoder.logvar", last, config.latent_dim);

        let mut dec_hidden = Vec::new();
        let mut prev = config.decoder_input_dim();
        for (i, &w) in config.hidden_widths.iter().enumerate() {
            dec_hidden.push(dense(&mut params, &format!("decoder.hidden{i}"), prev, w));
            prev = w;
        }
        let dec_norm = Some(norm(&mut params, "decoder.norm", last));
        let dec_out = dense(&mut params, "decoder.out", last, config.feature_dim);

        Ok(Self {
            config,
            params,
            encoder: Stack {
                hidden: enc_hidden,
                norm: enc_norm,
            },
            enc_mu,
            enc_logvar,
            decoder: Stack {
                hidden: dec_hidden,
                norm: dec_norm,
            },
            dec_out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn norm_layer(&self, slot: NormSlot) -> Option<&NormLayer> {
        match slot {
            NormSlot::Encoder => self.encoder.norm.as_ref(),
            NormSlot::Decoder => self.decoder.norm.as_ref(),
        }
    }

    fn norm_layer_mut(&mut self, slot: NormSlot) -> Option<&mut NormLayer> {
        match slot {
            NormSlot::Encoder => self.encoder.norm.as_mut(),
            NormSlot::Decoder => self.decoder.norm.as_mut(),
        }
    }

    /// Snapshot of a normalization layer as a standalone parameter bank.
    pub fn norm_bank(&self, slot: NormSlot) -> Option<CbnParamBank> {
        let n = self.norm_layer(slot)?;
        let gamma = self.params.get(n.gamma).clone();
        Some(CbnParamBank {
            num_classes: gamma.rows(),
            width: gamma.cols(),
            gamma,
            beta: self.params.get(n.beta).clone(),
            eps: self.config.norm_eps,
            running_mean: n.running_mean.clone(),
            running_var: n.running_var.clone(),
            momentum: self.config.norm_momentum,
        })
    }

    pub(crate) fn update_running_stats(&mut self, stats: &[(NormSlot, NormBatchStats)]) {
        let m = self.config.norm_momentum;
        for (slot, s) in stats {
            if let Some(layer) = self.norm_layer_mut(*slot) {
                for (r, &b) in layer.running_mean.iter_mut().zip(&s.mean) {
                    *r = (1.0 - m) * *r + m * b;
                }
                for (r, &b) in layer.running_var.iter_mut().zip(&s.var) {
                    *r = (1.0 - m) * *r + m * b;
                }
            }
        }
    }

    /// Normalization labels: the class for conditional layers, all zeros
    /// for plain batch norm.
    fn norm_labels(&self, labels: &[usize]) -> Vec<usize> {
        match self.config.norm {
            NormKind::Conditional => labels.to_vec(),
            NormKind::Plain => vec![0; labels.len()],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_stack(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        mut h: Var,
        stack: &Stack,
        slot: NormSlot,
        labels: &[usize],
        mode: Mode,
        stats: &mut Vec<(NormSlot, NormBatchStats)>,
    ) -> Result<Var> {
        let slope = self.config.leaky_slope;
        let last = stack.hidden.len() - 1;
        for (i, d) in stack.hidden.iter().enumerate() {
            let w = tape.param(store, d.weight);
            let b = tape.param(store, d.bias);
            h = tape.linear(h, w, b)?;
            if i == last {
                if let Some(n) = &stack.norm {
                    let g = tape.param(store, n.gamma);
                    let be = tape.param(store, n.beta);
                    let norm_labels = self.norm_labels(labels);
                    let running = match mode {
                        Mode::Train => None,
                        Mode::Eval => Some((n.running_mean.as_slice(), n.running_var.as_slice())),
                    };
                    let (out, s) = tape.norm(h, g, be, &norm_labels, self.config.norm_eps, running)?;
                    if let Some(s) = s {
                        stats.push((slot, s));
                    }
                    h = out;
                }
            }
            h = tape.leaky_relu(h, slope);
        }
        Ok(h)
    }

    fn check_batch(
        &self,
        rows: usize,
        cols: usize,
        want_cols: usize,
        labels: &[usize],
        what: &'static str,
    ) -> Result<()> {
        if cols != want_cols || labels.len() != rows {
            return Err(Error::Shape {
                op: what,
                left: (rows, cols),
                right: (labels.len(), want_cols),
            });
        }
        check_labels(labels, self.config.num_classes)
    }

    /// Records encoder ops; returns `(μ, clamped log σ²)`.
    pub fn encode_on(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        x: Var,
        labels: &[usize],
        mode: Mode,
        stats: &mut Vec<(NormSlot, NormBatchStats)>,
    ) -> Result<(Var, Var)> {
        let xv = tape.value(x);
        self.check_batch(xv.rows(), xv.cols(), self.config.feature_dim, labels, "encode")?;
        let y = tape.input(one_hot(labels, self.config.num_classes)?);
        let inp = tape.concat(x, y)?;
        let h = self.run_stack(store, tape, inp, &self.encoder, NormSlot::Encoder, labels, mode, stats)?;
        let mu = {
            let w = tape.param(store, self.enc_mu.weight);
            let b = tape.param(store, self.enc_mu.bias);
            tape.linear(h, w, b)?
        };
        let raw = {
            let w = tape.param(store, self.enc_logvar.weight);
            let b = tape.param(store, self.enc_logvar.bias);
            tape.linear(h, w, b)?
        };
        let logvar = tape.clamp(raw, LOGVAR_MIN, LOGVAR_MAX);
        Ok((mu, logvar))
    }

    /// Records decoder ops; returns the reconstruction in `(0, 1)`.
    pub fn decode_on(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        z: Var,
        labels: &[usize],
        mode: Mode,
        stats: &mut Vec<(NormSlot, NormBatchStats)>,
    ) -> Result<Var> {
        let zv = tape.value(z);
        self.check_batch(zv.rows(), zv.cols(), self.config.latent_dim, labels, "decode")?;
        let y = tape.input(one_hot(labels, self.config.num_classes)?);
        let inp = tape.concat(z, y)?;
        let h = self.run_stack(store, tape, inp, &self.decoder, NormSlot::Decoder, labels, mode, stats)?;
        let w = tape.param(store, self.dec_out.weight);
        let b = tape.param(store, self.dec_out.bias);
        let logits = tape.linear(h, w, b)?;
        Ok(tape.sigmoid(logits))
    }

    /// Full pass: encode, reparameterize with the supplied standard-normal
    /// `noise`, decode.
    pub fn forward_on(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        x: &Matrix,
        labels: &[usize],
        noise: &Matrix,
        mode: Mode,
    ) -> Result<ForwardPass> {
        let mut stats = Vec::new();
        let input = tape.input(x.clone());
        let (mu, logvar) = self.encode_on(store, tape, input, labels, mode, &mut stats)?;
        if tape.value(mu).shape() != noise.shape() {
            return Err(Error::Shape {
                op: "reparameterize(noise)",
                left: tape.value(mu).shape(),
                right: noise.shape(),
            });
        }
        let eps = tape.input(noise.clone());
        let half = tape.scale(logvar, 0.5);
        let std = tape.exp(half);
        let scaled = tape.mul(std, eps)?;
        let z = tape.add(mu, scaled)?;
        let x_hat = self.decode_on(store, tape, z, labels, mode, &mut stats)?;
        Ok(ForwardPass {
            input,
            mu,
            logvar,
            z,
            x_hat,
            norm_stats: stats,
        })
    }

    /// `(μ, clamped log σ²)` for a batch. In `Mode::Train` the batch
    /// statistics are used but running averages are not touched.
    pub fn encode(&self, x: &Matrix, labels: &[usize], mode: Mode) -> Result<(Matrix, Matrix)> {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let (mu, lv) = self.encode_on(&self.params, &mut tape, xv, labels, mode, &mut Vec::new())?;
        Ok((tape.value(mu).clone(), tape.value(lv).clone()))
    }

    pub fn decode(&self, z: &Matrix, labels: &[usize], mode: Mode) -> Result<Matrix> {
        let mut tape = Tape::new();
        let zv = tape.input(z.clone());
        let out = self.decode_on(&self.params, &mut tape, zv, labels, mode, &mut Vec::new())?;
        Ok(tape.value(out).clone())
    }

    /// `n` samples of class `label`: `z ~ N(0, I)`, decoded in evaluation
    /// mode.
    pub fn generate<R: Rng + ?Sized>(&self, label: usize, n: usize, rng: &mut R) -> Result<Matrix> {
        check_labels(&[label], self.config.num_classes)?;
        if n == 0 {
            return Err(Error::invalid("generate: n must be at least 1"));
        }
        const CHUNK: usize = 2048;
        let latent = self.config.latent_dim;
        let mut out = Matrix::zeros(0, self.config.feature_dim);
        let mut remaining = n;
        while remaining > 0 {
            let b = remaining.min(CHUNK);
            let z = standard_normal(b, latent, rng);
            let x = self.decode(&z, &vec![label; b], Mode::Eval)?;
            out = out.vstack(&x)?;
            remaining -= b;
        }
        Ok(out)
    }
}

/// `z = μ + exp(½·log σ²) ⊙ ε` with `ε ~ N(0, I)`; `logvar` is clamped first.
pub fn reparameterize<R: Rng + ?Sized>(mu: &Matrix, logvar: &Matrix, rng: &mut R) -> Result<Matrix> {
    let eps = standard_normal(mu.rows(), mu.cols(), rng);
    let std = logvar.map(|lv| (0.5 * lv.clamp(LOGVAR_MIN, LOGVAR_MAX)).exp());
    let scaled = std.zip_map(&eps, "reparameterize", |s, e| s * e)?;
    mu.zip_map(&scaled, "reparameterize", |m, s| m + s)
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}
