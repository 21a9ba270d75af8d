use serde_json::json;

use super::{assemble, BalanceRequest, Balanced, ClassBatch, Provenance};
use crate::error::{Error, Result};
use crate::model::{ModelCheckpoint, NormKind};

/// Fills each class deficit with rows sampled from the trained generator.
/// Synthetic rows stay in encoded space (no rounding of one-hot blocks).
pub fn generative_balance(req: &BalanceRequest, checkpoint: &ModelCheckpoint) -> Result<Balanced> {
    checkpoint.ensure_compatible(&req.dataset.fingerprint)?;
    let cfg = checkpoint.model.config();
    if cfg.feature_dim != req.dataset.feature_dim() || cfg.num_classes != req.dataset.num_classes {
        return Err(Error::invalid(format!(
            "generator is {} features / {} classes, dataset is {} / {}",
            cfg.feature_dim,
            cfg.num_classes,
            req.dataset.feature_dim(),
            req.dataset.num_classes
        )));
    }
    let method = match cfg.norm {
        NormKind::Conditional => "c2bnvae",
        NormKind::Plain => "cvae",
    };
    let deficits = req.deficits()?;
    let mut batches = Vec::new();
    for (c, &deficit) in deficits.iter().enumerate() {
        if deficit == 0 {
            continue;
        }
        let mut rng = req.class_rng("generate", c);
        let rows = checkpoint.generate(c, deficit, &mut rng)?;
        batches.push((
            c,
            ClassBatch {
                rows: rows.into_vec(),
                provenance: vec![Provenance::Generated; deficit],
                note: None,
            },
        ));
    }
    assemble(
        req,
        method,
        json!({ "latent_dim": cfg.latent_dim, "epochs": cfg.epochs, "model_seed": cfg.seed }),
        batches,
    )
}
