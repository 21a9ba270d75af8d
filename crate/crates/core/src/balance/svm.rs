use rand::seq::SliceRandom;
use serde_json::json;

use super::smote::{interpolate, interpolation_pool, INTERPOLATE_STREAM};
use super::{assemble, BalanceRequest, Balanced, ClassBatch};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::seed::SeededRng;

pub const SVM_EPOCHS: usize = 30;

/// Linear soft-margin SVM `f(x) = w·x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearSvm {
    /// Stochastic subgradient descent on the hinge loss with L2 penalty
    /// `λ = 1 / (C·n)`. Each of `epochs` passes visits the rows in a fresh
    /// shuffled order; step `t` (counted from 0 across epochs) uses
    /// `η = 1 / (1 + λ·t)`. The bias is not regularized.
    pub fn fit(dataset: &EncodedDataset, y: &[f64], penalty: f64, epochs: usize, rng: &mut SeededRng) -> Result<Self> {
        if !(penalty > 0.0) {
            return Err(Error::invalid("SVM penalty C must be positive"));
        }
        let n = dataset.len();
        let lambda = 1.0 / (penalty * n as f64);
        let mut w = vec![0.0; dataset.feature_dim()];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0usize;
        for _ in 0..epochs {
            order.shuffle(rng);
            for &i in &order {
                let eta = 1.0 / (1.0 + lambda * t as f64);
                let x = dataset.row(i);
                let margin = y[i] * (dot(&w, x) + b);
                let shrink = 1.0 - eta * lambda;
                for wj in w.iter_mut() {
                    *wj *= shrink;
                }
                if margin < 1.0 {
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj += eta * y[i] * xj;
                    }
                    b += eta * y[i];
                }
                t += 1;
            }
        }
        Ok(Self { w, b })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains class `c` against the rest and returns the class rows on or
/// inside the margin (`f(x) ≤ 1`).
pub fn svm_seeds(req: &BalanceRequest, c: usize, penalty: f64) -> Result<(LinearSvm, Vec<usize>)> {
    let d = req.dataset;
    let y: Vec<f64> = d.labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos < 2 || d.len() - pos < 2 {
        return Err(Error::invalid(format!(
            "svm_smote: class {c} vs rest needs 2 rows on each side ({pos} vs {})",
            d.len() - pos
        )));
    }
    let mut rng = req.class_rng("svm", c);
    let svm = LinearSvm::fit(d, &y, penalty, SVM_EPOCHS, &mut rng)?;
    let seeds = d
        .indices_of(c)
        .into_iter()
        .filter(|&i| svm.decision(d.row(i)) <= 1.0)
        .collect();
    Ok((svm, seeds))
}

/// SVM-SMOTE: seeds are the class's margin rows under a one-vs-rest linear
/// SVM; interpolation only (no extrapolation). Falls back to plain SMOTE
/// when a class has no margin rows.
pub fn svm_smote(req: &BalanceRequest, k: usize, penalty: f64) -> Result<Balanced> {
    if k == 0 {
        return Err(Error::invalid("neighbor count k must be at least 1"));
    }
    let deficits = req.deficits()?;
    let mut batches = Vec::new();
    for (c, &deficit) in deficits.iter().enumerate() {
        if deficit == 0 {
            continue;
        }
        let rows = interpolation_pool(req, c, deficit)?;
        let (_, mut seeds) = svm_seeds(req, c, penalty)?;
        let mut b = ClassBatch::default();
        if seeds.is_empty() {
            log::info!("svm_smote: class {c} has no margin rows, using plain SMOTE");
            b.note = Some("no margin rows, fell back to SMOTE".into());
            seeds = rows.clone();
        }
        let mut rng = req.class_rng(INTERPOLATE_STREAM, c);
        interpolate(&req.dataset.features, &seeds, &rows, k, deficit, &mut rng, &mut b);
        batches.push((c, b));
    }
    assemble(
        req,
        "svm_smote",
        json!({ "k": k, "penalty": penalty, "epochs": SVM_EPOCHS }),
        batches,
    )
}
