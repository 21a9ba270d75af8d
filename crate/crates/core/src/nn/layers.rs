//! Plain (tape-free) layer kernels.
//!
//! The gradient tape calls the same kernels for its forward pass, so the
//! functions here and the differentiable ops always agree bit-for-bit.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_NORM_EPS: f64 = 1e-5;
pub const DEFAULT_NORM_MOMENTUM: f64 = 0.1;

/// Dense affine layer, `out = x · W + b` with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.cols() != bias.len() {
            return Err(Error::Shape {
                op: "LinearLayer::new",
                left: weights.shape(),
                right: (1, bias.len()),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }
}

pub fn linear_forward(x: &Matrix, layer: &LinearLayer) -> Result<Matrix> {
    if x.cols() != layer.in_dim() {
        return Err(Error::Shape {
            op: "linear_forward",
            left: x.shape(),
            right: layer.weights.shape(),
        });
    }
    let mut out = x.matmul(&layer.weights)?;
    add_bias_in_place(&mut out, &layer.bias);
    Ok(out)
}

pub(crate) fn add_bias_in_place(out: &mut Matrix, bias: &[f64]) {
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// Elementwise `max(x, slope·x)` for `slope` in `[0, 1)`.
pub fn leaky_relu(x: &Matrix, slope: f64) -> Matrix {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(logistic)
}

#[inline]
pub(crate) fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Per-class affine parameters for one conditional batch-norm layer, plus the
/// class-agnostic running statistics used in evaluation mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbnParamBank {
    pub num_classes: usize,
    pub width: usize,
    /// `num_classes × width`; row `i` is `γ_i`.
    pub gamma: Matrix,
    /// `num_classes × width`; row `i` is `β_i`.
    pub beta: Matrix,
    pub eps: f64,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
}

impl CbnParamBank {
    /// Identity affine (`γ = 1`, `β = 0`), zero running mean, unit running
    /// variance.
    pub fn new(num_classes: usize, width: usize) -> Self {
        Self {
            num_classes,
            width,
            gamma: Matrix::filled(num_classes, width, 1.0),
            beta: Matrix::zeros(num_classes, width),
            eps: DEFAULT_NORM_EPS,
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: DEFAULT_NORM_MOMENTUM,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let want = (self.num_classes, self.width);
        if self.gamma.shape() != want || self.beta.shape() != want {
            return Err(Error::Shape {
                op: "CbnParamBank",
                left: self.gamma.shape(),
                right: self.beta.shape(),
            });
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!(
                "normalization eps must be > 0, got {}",
                self.eps
            )));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return Err(Error::invalid(format!(
                "normalization momentum must be in (0,1), got {}",
                self.momentum
            )));
        }
        if self.running_mean.len() != self.width || self.running_var.len() != self.width {
            return Err(Error::invalid("running statistics width mismatch"));
        }
        if self.running_var.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("running variance must be nonnegative"));
        }
        Ok(())
    }

    /// Exponential moving average update with the population batch variance.
    pub(crate) fn update_running(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        let m = self.momentum;
        for (r, &b) in self.running_mean.iter_mut().zip(batch_mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(batch_var) {
            *r = (1.0 - m) * *r + m * b;
        }
    }
}

/// Single shared affine pair: a conditional bank with one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm(pub CbnParamBank);

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        BatchNorm(CbnParamBank::new(1, width))
    }

    pub fn with_affine(gamma: &[f64], beta: &[f64]) -> Result<Self> {
        let mut bank = CbnParamBank::new(1, gamma.len());
        bank.gamma = Matrix::row_vector(gamma);
        bank.beta = Matrix::row_vector(beta);
        bank.validate()?;
        Ok(BatchNorm(bank))
    }
}

/// Which statistics a normalization pass uses.
#[derive(Clone, Copy, Debug)]
pub(crate) enum NormStats<'a> {
    Batch,
    Running { mean: &'a [f64], var: &'a [f64] },
}

pub(crate) struct NormOutput {
    pub out: Matrix,
    /// Pre-affine normalized activations `x̂`.
    pub normed: Matrix,
    /// `1 / sqrt(σ² + eps)` per column.
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

pub(crate) fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= num_classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, num_classes }),
        None => Ok(()),
    }
}

/// Shared normalization kernel: statistics pooled over all rows, affine
/// selected per row by its label.
pub(crate) fn normalize(
    x: &Matrix,
    labels: &[usize],
    gamma: &Matrix,
    beta: &Matrix,
    eps: f64,
    stats: NormStats<'_>,
) -> Result<NormOutput> {
    let (b, w) = x.shape();
    if gamma.cols() != w || beta.shape() != gamma.shape() {
        return Err(Error::Shape {
            op: "normalize",
            left: x.shape(),
            right: gamma.shape(),
        });
    }
    if labels.len() != b {
        return Err(Error::Shape {
            op: "normalize(labels)",
            left: x.shape(),
            right: (labels.len(), 1),
        });
    }
    check_labels(labels, gamma.rows())?;
    if b == 0 {
        return Err(Error::Empty("normalization batch"));
    }

    let (mean, var) = match stats {
        NormStats::Batch => {
            if b < 2 {
                return Err(Error::invalid(
                    "batch statistics need at least 2 rows (variance undefined for 1)",
                ));
            }
            let mean = x.column_means();
            let mut var = vec![0.0; w];
            for row in x.iter_rows() {
                for ((v, &xi), &m) in var.iter_mut().zip(row).zip(&mean) {
                    *v += (xi - m) * (xi - m);
                }
            }
            for v in &mut var {
                *v /= b as f64;
            }
            (mean, var)
        }
        NormStats::Running { mean, var } => (mean.to_vec(), var.to_vec()),
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut normed = Matrix::zeros(b, w);
    let mut out = Matrix::zeros(b, w);
    for (r, &label) in labels.iter().enumerate() {
        let g = gamma.row(label);
        let be = beta.row(label);
        let xr = x.row(r);
        let nr = normed.row_mut(r);
        for c in 0..w {
            nr[c] = (xr[c] - mean[c]) * inv_std[c];
        }
        let or = out.row_mut(r);
        for c in 0..w {
            or[c] = g[c] * nr[c] + be[c];
        }
    }
    Ok(NormOutput {
        out,
        normed,
        inv_std,
        batch_mean: mean,
        batch_var: var,
    })
}

/// Conditional batch normalization. Training mode pools mean and population
/// variance over the whole batch, applies each row's own `(γ_i, β_i)`, and
/// updates the running statistics; evaluation mode uses the running
/// statistics instead.
pub fn cbn_forward(x: &Matrix, labels: &[usize], bank: &mut CbnParamBank, training: bool) -> Result<Matrix> {
    bank.validate()?;
    let stats = if training {
        NormStats::Batch
    } else {
        NormStats::Running {
            mean: &bank.running_mean,
            var: &bank.running_var,
        }
    };
    let res = normalize(x, labels, &bank.gamma, &bank.beta, bank.eps, stats)?;
    if training {
        bank.update_running(&res.batch_mean, &res.batch_var);
    }
    Ok(res.out)
}

pub fn batchnorm_forward(x: &Matrix, params: &mut BatchNorm, training: bool) -> Result<Matrix> {
    let labels = vec![0; x.rows()];
    cbn_forward(x, &labels, &mut params.0, training)
}
