use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{RawRecord, TrafficFeatures, CATEGORICAL_NAMES, CATEGORICAL_POSITIONS, FEATURE_NAMES, NUM_NUMERIC};
use super::taxonomy::ClassTaxonomy;
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed::sha256_hex;

/// Fitted feature encoding: one-hot blocks for the three categorical
/// features, min-max scaling for the 38 numeric ones (clipped to [0, 1]),
/// optional zero padding.
///
/// Columns follow file order: `duration`, then the protocol, service and
/// flag blocks (each in sorted vocabulary order), then the remaining
/// numerics, then padding. A numeric column that is constant in the fitting
/// data encodes to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    pub vocab: [Vec<String>; 3],
    pub numeric_min: Vec<f64>,
    pub numeric_max: Vec<f64>,
    pub pad_to: Option<usize>,
    pub fingerprint: String,
}

/// Fits vocabularies on `train` and `vocab_extra` together (so test-only
/// categories still get a column) and numeric ranges on `train` alone.
pub fn fit_schema(train: &[RawRecord], vocab_extra: &[RawRecord], pad_to: Option<usize>) -> Result<EncodingSchema> {
    if train.is_empty() {
        return Err(Error::Empty("schema fitting records"));
    }
    let mut sets: [BTreeSet<&str>; 3] = Default::default();
    for r in train.iter().chain(vocab_extra) {
        for (k, v) in r.features.categorical.iter().enumerate() {
            sets[k].insert(v.as_str());
        }
    }
    let vocab = sets.map(|s| s.into_iter().map(String::from).collect::<Vec<_>>());

    let mut numeric_min = vec![f64::INFINITY; NUM_NUMERIC];
    let mut numeric_max = vec![f64::NEG_INFINITY; NUM_NUMERIC];
    for r in train {
        if r.features.numeric.len() != NUM_NUMERIC {
            return Err(Error::invalid("record does not have 38 numeric features"));
        }
        for (j, &v) in r.features.numeric.iter().enumerate() {
            numeric_min[j] = numeric_min[j].min(v);
            numeric_max[j] = numeric_max[j].max(v);
        }
    }
    let mut schema = EncodingSchema {
        vocab,
        numeric_min,
        numeric_max,
        pad_to: None,
        fingerprint: String::new(),
    };
    schema.set_pad_to(pad_to)?;
    Ok(schema)
}

impl EncodingSchema {
    /// Width before padding.
    pub fn natural_dim(&self) -> usize {
        NUM_NUMERIC + self.vocab.iter().map(Vec::len).sum::<usize>()
    }

    pub fn feature_dim(&self) -> usize {
        self.pad_to.unwrap_or_else(|| self.natural_dim())
    }

    /// Changes the padding target and refreshes the fingerprint.
    pub fn set_pad_to(&mut self, pad_to: Option<usize>) -> Result<()> {
        if let Some(p) = pad_to {
            if p < self.natural_dim() {
                return Err(Error::invalid(format!(
                    "pad_to {p} is below the natural width {}",
                    self.natural_dim()
                )));
            }
        }
        self.pad_to = pad_to;
        self.fingerprint = self.compute_fingerprint();
        Ok(())
    }

    pub fn is_constant(&self, numeric_index: usize) -> bool {
        self.numeric_max[numeric_index] <= self.numeric_min[numeric_index]
    }

    fn compute_fingerprint(&self) -> String {
        let mut buf = b"nslkdd-schema-v1".to_vec();
        for block in &self.vocab {
            buf.push(0x1e);
            for v in block {
                buf.extend_from_slice(v.as_bytes());
                buf.push(0x1f);
            }
        }
        for (lo, hi) in self.numeric_min.iter().zip(&self.numeric_max) {
            buf.extend_from_slice(&lo.to_bits().to_le_bytes());
            buf.extend_from_slice(&hi.to_bits().to_le_bytes());
        }
        buf.extend_from_slice(&(self.feature_dim() as u64).to_le_bytes());
        sha256_hex(&buf)
    }

    /// Human-readable column names, e.g. `service=http`, `src_bytes`, `pad0`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_dim());
        for (pos, name) in FEATURE_NAMES.iter().enumerate() {
            match CATEGORICAL_POSITIONS.iter().position(|&p| p == pos) {
                Some(k) => names.extend(self.vocab[k].iter().map(|v| format!("{name}={v}"))),
                None => names.push((*name).to_string()),
            }
        }
        let natural = names.len();
        names.extend((0..self.feature_dim() - natural).map(|i| format!("pad{i}")));
        names
    }

    pub fn encode_features(&self, f: &TrafficFeatures, out: &mut Vec<f64>) -> Result<()> {
        if f.numeric.len() != NUM_NUMERIC {
            return Err(Error::invalid("record does not have 38 numeric features"));
        }
        let start = out.len();
        let mut num = 0;
        for pos in 0..FEATURE_NAMES.len() {
            if let Some(k) = CATEGORICAL_POSITIONS.iter().position(|&p| p == pos) {
                let value = &f.categorical[k];
                let hit = self.vocab[k].binary_search(value).map_err(|_| Error::UnknownCategory {
                    column: CATEGORICAL_NAMES[k],
                    value: value.clone(),
                })?;
                let base = out.len();
                out.resize(base + self.vocab[k].len(), 0.0);
                out[base + hit] = 1.0;
            } else {
                let (lo, hi) = (self.numeric_min[num], self.numeric_max[num]);
                out.push(if hi > lo {
                    ((f.numeric[num] - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                });
                num += 1;
            }
        }
        out.resize(start + self.feature_dim(), 0.0);
        Ok(())
    }

    /// Encodes records and maps their attack names to category labels.
    pub fn transform(&self, records: &[RawRecord], taxonomy: &ClassTaxonomy) -> Result<EncodedDataset> {
        let d = self.feature_dim();
        let mut data = Vec::with_capacity(records.len() * d);
        let mut labels = Vec::with_capacity(records.len());
        for r in records {
            self.encode_features(&r.features, &mut data)?;
            labels.push(taxonomy.map_attack(&r.attack_name)?);
        }
        let features = Matrix::from_vec(records.len(), d, data)?;
        EncodedDataset::with_fingerprint(features, labels, taxonomy.num_categories(), self.fingerprint.clone())
    }

    /// Decodes one encoded row. Each one-hot block decodes to its argmax
    /// (ties go to the earlier vocabulary entry); numerics are clipped to
    /// [0, 1] before unscaling. Padding is ignored.
    pub fn inverse_transform(&self, row: &[f64]) -> Result<TrafficFeatures> {
        if row.len() != self.feature_dim() {
            return Err(Error::Shape {
                op: "inverse_transform",
                left: (1, row.len()),
                right: (1, self.feature_dim()),
            });
        }
        let mut numeric = Vec::with_capacity(NUM_NUMERIC);
        let mut categorical: [String; 3] = Default::default();
        let mut col = 0;
        for pos in 0..FEATURE_NAMES.len() {
            if let Some(k) = CATEGORICAL_POSITIONS.iter().position(|&p| p == pos) {
                let block = &row[col..col + self.vocab[k].len()];
                let mut best = 0;
                for (i, &v) in block.iter().enumerate() {
                    if v > block[best] {
                        best = i;
                    }
                }
                categorical[k] = self.vocab[k][best].clone();
                col += block.len();
            } else {
                let j = numeric.len();
                let (lo, hi) = (self.numeric_min[j], self.numeric_max[j]);
                let v = row[col].clamp(0.0, 1.0);
                numeric.push(if hi > lo { lo + v * (hi - lo) } else { lo });
                col += 1;
            }
        }
        Ok(TrafficFeatures { numeric, categorical })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Parses a schema and checks that its fingerprint matches its contents.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: EncodingSchema = serde_json::from_str(text)?;
        if s.numeric_min.len() != NUM_NUMERIC || s.numeric_max.len() != NUM_NUMERIC {
            return Err(Error::Format("schema must hold 38 numeric ranges".into()));
        }
        for block in &s.vocab {
            if block.windows(2).any(|w| w[0] >= w[1]) || block.is_empty() {
                return Err(Error::Format(
                    "schema vocabularies must be sorted, distinct, nonempty".into(),
                ));
            }
        }
        let expected = s.compute_fingerprint();
        if expected != s.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected,
                found: s.fingerprint,
            });
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
