//! Checkpoint file format.
//!
//! ```text
//! magic "C2BV" | version u32 | header str (JSON: config, schema
//! fingerprint, note) | block count u32 | blocks
//! ```
//!
//! Each block is `name str ‖ matrix` (see `dataset` for the primitive
//! encodings): every trainable tensor in parameter-store order, then the
//! running mean and variance of each normalization layer as `1 × w` rows.
//! Floats are stored as raw little-endian bits, so a round trip is exact.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{C2bnVae, ModelConfig, NormSlot};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"C2BV";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub model: C2bnVae,
    pub schema_fingerprint: String,
    /// Free-form provenance line (tool version, config digest, seed).
    pub note: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    schema_fingerprint: String,
    note: String,
}

impl ModelCheckpoint {
    pub fn new(model: C2bnVae, schema_fingerprint: String) -> Self {
        Self {
            model,
            schema_fingerprint,
            note: String::new(),
        }
    }

    pub fn format_version(&self) -> u32 {
        CHECKPOINT_VERSION
    }

    /// Refuses datasets encoded by a different schema.
    pub fn ensure_compatible(&self, dataset_fingerprint: &str) -> Result<()> {
        if self.schema_fingerprint != dataset_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.schema_fingerprint.clone(),
                found: dataset_fingerprint.to_string(),
            });
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, label: usize, n: usize, rng: &mut R) -> Result<Matrix> {
        self.model.generate(label, n, rng)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.schema_fingerprint.is_empty() {
            return Err(Error::invalid("checkpoint schema fingerprint must be non-empty"));
        }
        let header = Header {
            config: self.model.config.clone(),
            schema_fingerprint: self.schema_fingerprint.clone(),
            note: self.note.clone(),
        };
        let mut w = Writer::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.str(&serde_json::to_string(&header)?);

        let norms: Vec<_> = [NormSlot::Encoder, NormSlot::Decoder]
            .into_iter()
            .filter_map(|s| self.model.norm_layer(s))
            .collect();
        w.u32((self.model.params.len() + 2 * norms.len()) as u32);
        for (name, m) in self.model.params.iter() {
            w.str(name);
            w.matrix(m);
        }
        for n in norms {
            w.str(&format!("{}.running_mean", n.name));
            w.matrix(&Matrix::row_vector(&n.running_mean));
            w.str(&format!("{}.running_var", n.name));
            w.matrix(&Matrix::row_vector(&n.running_var));
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(CHECKPOINT_MAGIC)?;
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let header: Header = serde_json::from_str(&r.str()?)?;
        let mut model = C2bnVae::new(header.config)?;

        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.str()?;
            let m = r.matrix()?;
            blocks.push((name, m));
        }
        r.finish()?;

        let n_params = model.params.len();
        if blocks.len() < n_params {
            return Err(Error::Format(format!(
                "checkpoint has {} blocks, model needs at least {n_params}",
                blocks.len()
            )));
        }
        let stats = blocks.split_off(n_params);
        model.params.replace_all(blocks)?;

        let mut stats = stats.into_iter();
        for slot in [NormSlot::Encoder, NormSlot::Decoder] {
            let Some(layer) = model.norm_layer_mut(slot) else {
                continue;
            };
            for (suffix, target) in [
                ("running_mean", &mut layer.running_mean),
                ("running_var", &mut layer.running_var),
            ] {
                let want = format!("{}.{suffix}", layer.name);
                let (name, m) = stats
                    .next()
                    .ok_or_else(|| Error::Format(format!("missing block {want}")))?;
                if name != want || m.shape() != (1, target.len()) {
                    return Err(Error::Format(format!(
                        "expected block {want}, found {name} {:?}",
                        m.shape()
                    )));
                }
                *target = m.into_vec();
            }
        }
        if stats.next().is_some() {
            return Err(Error::Format("unexpected extra blocks".into()));
        }
        if header.schema_fingerprint.is_empty() {
            return Err(Error::Format("empty schema fingerprint".into()));
        }
        Ok(Self {
            model,
            schema_fingerprint: header.schema_fingerprint,
            note: header.note,
        })
    }
}

pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: &Path) -> Result<()> {
    let bytes = checkpoint.to_bytes()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelCheckpoint::from_bytes(&bytes)
}
