use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{standard_normal, C2bnVae, Mode, ModelCheckpoint, ModelConfig};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, kl_gaussian, mse_loss, AdamState, Matrix, Tape};
use crate::seed::child_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub regu: f64,
}

/// `total = recon + kl_weight · regu` with element-mean MSE reconstruction
/// and batch-mean KL regularization.
pub fn loss(x: &Matrix, x_hat: &Matrix, mu: &Matrix, logvar: &Matrix, kl_weight: f64) -> Result<LossBreakdown> {
    let recon = mse_loss(x, x_hat)?;
    let regu = kl_gaussian(mu, logvar)?;
    Ok(LossBreakdown {
        total: recon + kl_weight * regu,
        recon,
        regu,
    })
}

/// Sample-weighted epoch means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub recon: f64,
    pub regu: f64,
    pub total: f64,
}

pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub trace: Vec<EpochLoss>,
}

impl TrainOutcome {
    /// Loss trace as CSV with header `epoch,recon,regu,total`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("epoch,recon,regu,total\n");
        for e in &self.trace {
            s.push_str(&format!("{},{:?},{:?},{:?}\n", e.epoch, e.recon, e.regu, e.total));
        }
        s
    }
}

impl C2bnVae {
    /// One optimizer step on a mini-batch. Returns the batch losses.
    pub fn train_step(
        &mut self,
        x: &Matrix,
        labels: &[usize],
        noise: &Matrix,
        adam: &mut AdamState,
    ) -> Result<LossBreakdown> {
        let mut tape = Tape::new();
        let pass = self.forward_on(&self.params, &mut tape, x, labels, noise, Mode::Train)?;
        let recon = tape.mse(pass.input, pass.x_hat)?;
        let regu = tape.kl_gaussian(pass.mu, pass.logvar)?;
        let weighted = tape.scale(regu, self.config.kl_weight);
        let total = tape.add(recon, weighted)?;
        let out = LossBreakdown {
            total: tape.scalar(total),
            recon: tape.scalar(recon),
            regu: tape.scalar(regu),
        };
        if !out.total.is_finite() {
            return Ok(out);
        }
        let grads = tape.backward(total)?.for_store(&self.params)?;
        adam_step(self.params.values_mut(), &grads, adam, self.config.lr)?;
        self.update_running_stats(&pass.norm_stats);
        Ok(out)
    }
}

/// Trains a fresh model on `dataset`.
///
/// Each epoch reshuffles the rows (seeded), walks them in mini-batches of
/// `batch_size`, keeps the last partial batch, and skips batches of one row
/// (batch variance is undefined). `epochs = 0` returns the initialization.
pub fn train(dataset: &EncodedDataset, config: &ModelConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if dataset.feature_dim() != config.feature_dim || dataset.num_classes != config.num_classes {
        return Err(Error::invalid(format!(
            "dataset is {} features / {} classes, model expects {} / {}",
            dataset.feature_dim(),
            dataset.num_classes,
            config.feature_dim,
            config.num_classes
        )));
    }
    let mut model = C2bnVae::new(config.clone())?;
    let mut adam = AdamState::new(model.params().values());
    let mut shuffle_rng = child_rng(config.seed, "shuffle");
    let mut noise_rng = child_rng(config.seed, "noise");

    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut recon, mut regu, mut total, mut seen) = (0.0, 0.0, 0.0, 0usize);
        for (batch_idx, idx) in order.chunks(config.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let x = dataset.features.select_rows(idx);
            let labels: Vec<usize> = idx.iter().map(|&i| dataset.labels[i]).collect();
            let noise = standard_normal(idx.len(), config.latent_dim, &mut noise_rng);
            let l = model.train_step(&x, &labels, &noise, &mut adam)?;
            if !l.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    recon: l.recon,
                    regu: l.regu,
                });
            }
            let b = idx.len() as f64;
            recon += l.recon * b;
            regu += l.regu * b;
            total += l.total * b;
            seen += idx.len();
        }
        let seen = seen.max(1) as f64;
        let e = EpochLoss {
            epoch,
            recon: recon / seen,
            regu: regu / seen,
            total: total / seen,
        };
        log::debug!(
            "epoch {epoch}: total={:.6} recon={:.6} regu={:.6}",
            e.total,
            e.recon,
            e.regu
        );
        trace.push(e);
    }
    Ok(TrainOutcome {
        checkpoint: ModelCheckpoint::new(model, dataset.fingerprint.clone()),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_structure() {
        let x = Matrix::from_rows(&[[0.2, 0.4]]).unwrap();
        let z = Matrix::zeros(1, 3);
        let l = loss(&x, &x, &z, &z, 1.0).unwrap();
        assert_eq!((l.total, l.recon, l.regu), (0.0, 0.0, 0.0));

        let mu = Matrix::filled(1, 1, 1.0);
        let lv = Matrix::zeros(1, 1);
        let x_hat = Matrix::from_rows(&[[1.2, 1.4]]).unwrap();
        let l = loss(&x, &x_hat, &mu, &lv, 0.0).unwrap();
        assert_eq!(l.total, l.recon);

        // recon 1.0, regu 0.5
        let x0 = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let x1 = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let l = loss(&x0, &x1, &mu, &lv, 1.0).unwrap();
        assert!((l.recon - 1.0).abs() < 1e-15 && (l.regu - 0.5).abs() < 1e-15);
        assert!((l.total - 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = EncodedDataset::new(Matrix::zeros(0, 3), vec![], 2).unwrap();
        assert!(matches!(train(&d, &ModelConfig::new(3, 2)), Err(Error::Empty(_))));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = EncodedDataset::new(Matrix::filled(4, 3, 0.5), vec![0, 1, 0, 1], 2).unwrap();
        let cfg = ModelConfig {
            epochs: 0,
            seed: 5,
            ..ModelConfig::new(3, 2)
        };
        let out = train(&d, &cfg).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.checkpoint.model, C2bnVae::new(cfg).unwrap());
    }
}
