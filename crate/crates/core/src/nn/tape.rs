//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation in execution order. Each node keeps
//! its forward value plus whatever the backward rule needs; `backward`
//! walks the record in reverse and accumulates exact gradients for every
//! node that depends on a parameter.

use super::layers::{self, NormStats};
use super::loss::{clamp_logvar, LOGVAR_MAX, LOGVAR_MIN};
use super::matrix::Matrix;
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Exp(Var),
    Clamp(Var, f64, f64),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Concat(Var, Var),
    Norm {
        x: Var,
        gamma: Var,
        beta: Var,
        labels: Vec<usize>,
        normed: Matrix,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Mse(Var, Var),
    Kl(Var, Var),
    SumAll(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Batch statistics produced by a training-mode normalization node.
#[derive(Clone, Debug, PartialEq)]
pub struct NormBatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[(0, 0)]
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn req(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a trainable leaf for `id` holding a copy of its current value.
    /// Recording the same id twice returns the existing node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Leaf, true);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.req(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Adds a `1 × n` bias row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape {
                op: "add_bias",
                left: xv.shape(),
                right: bv.shape(),
            });
        }
        let mut value = xv.clone();
        layers::add_bias_in_place(&mut value, bv.as_slice());
        let rg = self.req(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), rg))
    }

    /// `x · W + b` with `W` stored `in × out` and `b` as `1 × out`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let xw = self.matmul(x, weight)?;
        self.add_bias(xw, bias)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.req(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.req(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v * s);
        let rg = self.req(&[a]);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let rg = self.req(&[a]);
        self.push(value, Op::Exp(a), rg)
    }

    /// Clamps into `[lo, hi]`; gradient passes only inside the range.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|v| v.clamp(lo, hi));
        let rg = self.req(&[a]);
        self.push(value, Op::Clamp(a, lo, hi), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = layers::leaky_relu(self.value(a), slope);
        let rg = self.req(&[a]);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = layers::sigmoid(self.value(a));
        let rg = self.req(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hcat(self.value(b))?;
        let rg = self.req(&[a, b]);
        Ok(self.push(value, Op::Concat(a, b), rg))
    }

    /// Conditional batch normalization. `gamma`/`beta` are
    /// `num_classes × width`; each row of `x` uses the affine row of its
    /// label. Pass `running = None` for batch statistics (training) or the
    /// running mean/variance (evaluation). Returns the batch statistics in
    /// training mode so the caller can update its running averages.
    pub fn norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        labels: &[usize],
        eps: f64,
        running: Option<(&[f64], &[f64])>,
    ) -> Result<(Var, Option<NormBatchStats>)> {
        let stats = match running {
            None => NormStats::Batch,
            Some((mean, var)) => NormStats::Running { mean, var },
        };
        let res = layers::normalize(self.value(x), labels, self.value(gamma), self.value(beta), eps, stats)?;
        let batch_stats = running.is_none();
        let rg = self.req(&[x, gamma, beta]);
        let out = self.push(
            res.out,
            Op::Norm {
                x,
                gamma,
                beta,
                labels: labels.to_vec(),
                normed: res.normed,
                inv_std: res.inv_std,
                batch_stats,
            },
            rg,
        );
        let stats = batch_stats.then_some(NormBatchStats {
            mean: res.batch_mean,
            var: res.batch_var,
        });
        Ok((out, stats))
    }

    /// Element-mean squared error as a `1 × 1` node.
    pub fn mse(&mut self, x: Var, x_hat: Var) -> Result<Var> {
        let value = super::loss::mse_loss(self.value(x), self.value(x_hat))?;
        let rg = self.req(&[x, x_hat]);
        Ok(self.push(Matrix::filled(1, 1, value), Op::Mse(x, x_hat), rg))
    }

    /// Batch-mean Gaussian KL to the standard normal as a `1 × 1` node.
    pub fn kl_gaussian(&mut self, mu: Var, logvar: Var) -> Result<Var> {
        let value = super::loss::kl_gaussian(self.value(mu), self.value(logvar))?;
        let rg = self.req(&[mu, logvar]);
        Ok(self.push(Matrix::filled(1, 1, value), Op::Kl(mu, logvar), rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        let rg = self.req(&[a]);
        self.push(value, Op::SumAll(a), rg)
    }

    /// Reverse pass from a `1 × 1` loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward(loss must be 1x1)",
                left: lv.shape(),
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.matmul_t(self.value(*b))?);
                }
                if self.wants(*b) {
                    accumulate(grads, *b, self.value(*a).t_matmul(g)?);
                }
            }
            Op::AddBias(x, bias) => {
                if self.wants(*x) {
                    accumulate(grads, *x, g.clone());
                }
                if self.wants(*bias) {
                    accumulate(grads, *bias, g.sum_rows());
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.wants(*v) {
                        accumulate(grads, *v, g.clone());
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.zip_map(self.value(*b), "mul'", |x, y| x * y)?);
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.zip_map(self.value(*a), "mul'", |x, y| x * y)?);
                }
            }
            Op::Scale(a, s) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.map(|v| v * s));
                }
            }
            Op::Exp(a) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.zip_map(&node.value, "exp'", |x, y| x * y)?);
                }
            }
            Op::Clamp(a, lo, hi) => {
                if self.wants(*a) {
                    let (lo, hi) = (*lo, *hi);
                    let d = g.zip_map(
                        self.value(*a),
                        "clamp'",
                        |gv, x| if x >= lo && x <= hi { gv } else { 0.0 },
                    )?;
                    accumulate(grads, *a, d);
                }
            }
            Op::LeakyRelu(a, slope) => {
                if self.wants(*a) {
                    let s = *slope;
                    let d = g.zip_map(
                        self.value(*a),
                        "leaky_relu'",
                        |gv, x| if x >= 0.0 { gv } else { s * gv },
                    )?;
                    accumulate(grads, *a, d);
                }
            }
            Op::Sigmoid(a) => {
                if self.wants(*a) {
                    accumulate(
                        grads,
                        *a,
                        g.zip_map(&node.value, "sigmoid'", |gv, y| gv * y * (1.0 - y))?,
                    );
                }
            }
            Op::Concat(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = g.rows();
                if self.wants(*a) {
                    let mut d = Matrix::zeros(rows, ca);
                    for r in 0..rows {
                        d.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                    }
                    accumulate(grads, *a, d);
                }
                if self.wants(*b) {
                    let mut d = Matrix::zeros(rows, cb);
                    for r in 0..rows {
                        d.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                    }
                    accumulate(grads, *b, d);
                }
            }
            Op::Norm {
                x,
                gamma,
                beta,
                labels,
                normed,
                inv_std,
                batch_stats,
            } => self.norm_backward(g, *x, *gamma, *beta, labels, normed, inv_std, *batch_stats, grads),
            Op::Mse(x, x_hat) => {
                let a = self.value(*x);
                let b = self.value(*x_hat);
                let n = a.as_slice().len().max(1) as f64;
                let scale = 2.0 * g[(0, 0)] / n;
                let d = a.zip_map(b, "mse'", |p, q| scale * (p - q))?;
                if self.wants(*x_hat) {
                    accumulate(grads, *x_hat, d.map(|v| -v));
                }
                if self.wants(*x) {
                    accumulate(grads, *x, d);
                }
            }
            Op::Kl(mu, logvar) => {
                let b = self.value(*mu).rows().max(1) as f64;
                let s = g[(0, 0)] / b;
                if self.wants(*mu) {
                    accumulate(grads, *mu, self.value(*mu).map(|m| s * m));
                }
                if self.wants(*logvar) {
                    let d = self.value(*logvar).map(|lv| {
                        if (LOGVAR_MIN..=LOGVAR_MAX).contains(&lv) {
                            -0.5 * s * (1.0 - clamp_logvar(lv).exp())
                        } else {
                            0.0
                        }
                    });
                    accumulate(grads, *logvar, d);
                }
            }
            Op::SumAll(a) => {
                if self.wants(*a) {
                    let (r, c) = self.value(*a).shape();
                    accumulate(grads, *a, Matrix::filled(r, c, g[(0, 0)]));
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn norm_backward(
        &self,
        g: &Matrix,
        x: Var,
        gamma: Var,
        beta: Var,
        labels: &[usize],
        normed: &Matrix,
        inv_std: &[f64],
        batch_stats: bool,
        grads: &mut [Option<Matrix>],
    ) {
        let (b, w) = g.shape();
        let gamma_v = self.value(gamma);
        if self.wants(gamma) || self.wants(beta) {
            let mut dg = Matrix::zeros(gamma_v.rows(), w);
            let mut db = Matrix::zeros(gamma_v.rows(), w);
            for (r, &l) in labels.iter().enumerate() {
                let (gr, nr) = (g.row(r), normed.row(r));
                for c in 0..w {
                    dg[(l, c)] += gr[c] * nr[c];
                    db[(l, c)] += gr[c];
                }
            }
            if self.wants(gamma) {
                accumulate(grads, gamma, dg);
            }
            if self.wants(beta) {
                accumulate(grads, beta, db);
            }
        }
        if !self.wants(x) {
            return;
        }
        // h = dL/dx̂
        let mut h = Matrix::zeros(b, w);
        for (r, &l) in labels.iter().enumerate() {
            let gm = gamma_v.row(l);
            for ((hv, gv), gmv) in h.row_mut(r).iter_mut().zip(g.row(r)).zip(gm) {
                *hv = gv * gmv;
            }
        }
        let mut dx = Matrix::zeros(b, w);
        if batch_stats {
            let bf = b as f64;
            let mut sum_h = vec![0.0; w];
            let mut sum_hx = vec![0.0; w];
            for r in 0..b {
                for c in 0..w {
                    sum_h[c] += h[(r, c)];
                    sum_hx[c] += h[(r, c)] * normed[(r, c)];
                }
            }
            for r in 0..b {
                for c in 0..w {
                    dx[(r, c)] = inv_std[c] / bf * (bf * h[(r, c)] - sum_h[c] - normed[(r, c)] * sum_hx[c]);
                }
            }
        } else {
            for r in 0..b {
                for c in 0..w {
                    dx[(r, c)] = h[(r, c)] * inv_std[c];
                }
            }
        }
        accumulate(grads, x, dx);
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, d: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    /// Gradient for any node; `None` when nothing flowed into it.
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for a recorded parameter. Parameters that the loss does not
    /// depend on get an all-zero gradient; unrecorded ids are an error.
    pub fn param(&self, id: ParamId, store: &ParamStore) -> Result<Matrix> {
        let (_, var) = self
            .params
            .iter()
            .find(|(p, _)| *p == id)
            .ok_or(Error::ParamNotOnTape(id.0))?;
        Ok(match self.wrt(*var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = store.get(id).shape();
                Matrix::zeros(r, c)
            }
        })
    }

    /// Gradients for every tensor of `store`, in store order.
    pub fn for_store(&self, store: &ParamStore) -> Result<Vec<Matrix>> {
        store.ids().map(|id| self.param(id, store)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut store = ParamStore::new();
        let p = store.add("p", Matrix::filled(1, 1, 3.0));
        let mut tape = Tape::new();
        let pv = tape.param(&store, p);
        let sq = tape.mul(pv, pv).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(p, &store).unwrap()[(0, 0)], 6.0);
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut store = ParamStore::new();
        let p = store.add("p", Matrix::filled(2, 2, 1.0));
        let mut tape = Tape::new();
        let _ = tape.param(&store, p);
        let c = tape.input(Matrix::filled(1, 1, 4.0));
        let loss = tape.sum_all(c);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(p, &store).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn unrecorded_param_is_an_error() {
        let mut store = ParamStore::new();
        let p = store.add("p", Matrix::filled(1, 1, 1.0));
        let q = store.add("q", Matrix::filled(1, 1, 1.0));
        let mut tape = Tape::new();
        let pv = tape.param(&store, p);
        let loss = tape.sum_all(pv);
        let grads = tape.backward(loss).unwrap();
        assert!(matches!(grads.param(q, &store), Err(Error::ParamNotOnTape(1))));
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::new();
        let v = tape.input(Matrix::zeros(2, 2));
        assert!(tape.backward(v).is_err());
    }
}
