//! Encoded (numeric) datasets and their on-disk formats.
//!
//! Binary layout (`.bin`), all integers little-endian:
//!
//! ```text
//! magic "C2DS" | version u32 | fingerprint str | note str
//! | num_classes u32 | n u64 | labels u32 × n | features matrix
//! ```
//!
//! where `str` is `u32 length ‖ utf-8 bytes` and `matrix` is
//! `rows u64 ‖ cols u64 ‖ f64 × rows·cols`. The CSV form has one header
//! line `f0,…,f{d-1},label` preceded by `#` comment lines carrying the
//! note and fingerprint; floats are written in shortest round-trip form.

use std::io::Write;
use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const DATASET_MAGIC: &[u8; 4] = b"C2DS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Digest of the encoding schema that produced the features.
    pub fingerprint: String,
}

impl EncodedDataset {
    /// Builds a dataset not tied to any encoding schema; its fingerprint
    /// records only the shape.
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let fingerprint = format!("raw:{}x{}", features.cols(), num_classes);
        Self::with_fingerprint(features, labels, num_classes, fingerprint)
    }

    pub fn with_fingerprint(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        fingerprint: impl Into<String>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape {
                op: "EncodedDataset",
                left: features.shape(),
                right: (labels.len(), 1),
            });
        }
        crate::nn::layers::check_labels(&labels, num_classes)?;
        if !features.is_finite() {
            return Err(Error::invalid("dataset features must be finite"));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            fingerprint: fingerprint.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.num_classes)
    }

    /// Row indices of class `c`, ascending.
    pub fn indices_of(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == c).then_some(i))
            .collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Appends rows below the existing ones.
    pub fn extend(&mut self, features: &Matrix, labels: &[usize]) -> Result<()> {
        if features.rows() != labels.len() {
            return Err(Error::Shape {
                op: "EncodedDataset::extend",
                left: features.shape(),
                right: (labels.len(), 1),
            });
        }
        crate::nn::layers::check_labels(labels, self.num_classes)?;
        self.features = self.features.vstack(features)?;
        self.labels.extend_from_slice(labels);
        Ok(())
    }

    pub fn to_bytes(&self, note: &str) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(DATASET_MAGIC);
        w.u32(DATASET_VERSION);
        w.str(&self.fingerprint);
        w.str(note);
        w.u32(self.num_classes as u32);
        w.u64(self.labels.len() as u64);
        for &l in &self.labels {
            w.u32(l as u32);
        }
        w.matrix(&self.features);
        w.buf
    }

    /// Parses the binary form, returning the dataset and its note.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let mut r = Reader::new(bytes);
        r.expect_magic(DATASET_MAGIC)?;
        let version = r.u32()?;
        if version != DATASET_VERSION {
            return Err(Error::Version {
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let fingerprint = r.str()?;
        let note = r.str()?;
        let num_classes = r.u32()? as usize;
        let n = r.u64()? as usize;
        let mut labels = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            labels.push(r.u32()? as usize);
        }
        let features = r.matrix()?;
        r.finish()?;
        Ok((
            Self::with_fingerprint(features, labels, num_classes, fingerprint)?,
            note,
        ))
    }

    pub fn to_csv(&self, note: &str) -> String {
        let mut out = String::new();
        for line in note.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!(
            "# fingerprint={} classes={}\n",
            self.fingerprint, self.num_classes
        ));
        let header: Vec<String> = (0..self.feature_dim()).map(|i| format!("f{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",label\n");
        for (row, &l) in self.features.iter_rows().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v:?},"));
            }
            out.push_str(&format!("{l}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut fingerprint = None;
        let mut num_classes = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels = Vec::new();
        let mut saw_header = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(comment) = line.strip_prefix('#') {
                for tok in comment.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("fingerprint=") {
                        fingerprint = Some(v.to_string());
                    } else if let Some(v) = tok.strip_prefix("classes=") {
                        num_classes = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                            line: line_no,
                            message: format!("bad class count: {e}"),
                        })?);
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let (label, feats) = fields.split_last().ok_or(Error::Parse {
                line: line_no,
                message: "empty row".into(),
            })?;
            let parsed = feats
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad feature value: {e}"),
                })?;
            rows.push(parsed);
            labels.push(label.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad label: {e}"),
            })?);
        }
        let features = Matrix::from_rows(&rows)?;
        let num_classes = num_classes.ok_or_else(|| Error::Format("missing classes= comment".into()))?;
        let fingerprint = fingerprint.ok_or_else(|| Error::Format("missing fingerprint= comment".into()))?;
        Self::with_fingerprint(features, labels, num_classes, fingerprint)
    }

    /// Writes `.csv` files as CSV and anything else as the binary format.
    pub fn save(&self, path: &Path, note: &str) -> Result<()> {
        let bytes = if is_csv(path) {
            self.to_csv(note).into_bytes()
        } else {
            self.to_bytes(note)
        };
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if is_csv(path) {
            let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
            Self::from_csv(&text)
        } else {
            Ok(Self::from_bytes(&bytes)?.0)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Per-class counts; always `num_classes` long and summing to `labels.len()`.
pub fn class_counts(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &l in labels {
        if l < num_classes {
            counts[l] += 1;
        }
    }
    counts
}

/// Picks `round(n_c · fraction)` rows of every class (at least one from a
/// nonempty class) without replacement, returned in ascending order so the
/// subsample keeps the original row order.
pub fn stratified_subsample<R: rand::Rng + ?Sized>(
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "subsample fraction {fraction} is outside (0, 1]"
        )));
    }
    crate::nn::layers::check_labels(labels, num_classes)?;
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut out = Vec::new();
    for rows in &by_class {
        if rows.is_empty() {
            continue;
        }
        let keep = ((rows.len() as f64 * fraction).round() as usize).clamp(1, rows.len());
        out.extend(
            rand::seq::index::sample(rng, rows.len(), keep)
                .into_iter()
                .map(|j| rows[j]),
        );
    }
    out.sort_unstable();
    Ok(out)
}
