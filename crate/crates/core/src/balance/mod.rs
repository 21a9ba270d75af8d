//! Class balancing by minority oversampling.
//!
//! Every balancer returns the original rows unchanged, in their original
//! order, followed by the synthetic rows grouped by class (ascending). Each
//! class draws from its own child RNG, so adding or removing a class does
//! not perturb the others.

mod generative;
mod kmeans;
mod knn;
mod smote;
mod svm;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed::{child_rng, SeededRng};

pub use generative::generative_balance;
pub use kmeans::{kmeans, KMeansResult};
pub use knn::nearest_neighbors;
pub use smote::{borderline_smote, danger_set, kmeans_smote, smote};
pub use svm::{svm_seeds, svm_smote, LinearSvm, SVM_EPOCHS};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_M: usize = 10;
pub const DEFAULT_CLUSTERS: usize = 8;
pub const DEFAULT_IMBALANCE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_PENALTY: f64 = 1.0;

/// `deficit_c = max(counts) − counts_c`.
pub fn target_counts(counts: &[usize]) -> Result<Vec<usize>> {
    let max = *counts.iter().max().ok_or(Error::Empty("class counts"))?;
    Ok(counts.iter().map(|&c| max - c).collect())
}

#[derive(Clone, Debug)]
pub struct BalanceRequest<'a> {
    pub dataset: &'a EncodedDataset,
    /// Desired per-class counts after balancing.
    pub targets: Vec<usize>,
    pub seed: u64,
}

impl<'a> BalanceRequest<'a> {
    /// Targets every class to the size of the largest one.
    pub fn to_max(dataset: &'a EncodedDataset, seed: u64) -> Result<Self> {
        let counts = dataset.class_counts();
        let max = counts.iter().copied().max().unwrap_or(0);
        Ok(Self {
            dataset,
            targets: vec![max; counts.len()],
            seed,
        })
    }

    pub fn deficits(&self) -> Result<Vec<usize>> {
        let counts = self.dataset.class_counts();
        if self.targets.len() != counts.len() {
            return Err(Error::invalid(format!(
                "{} targets for {} classes",
                self.targets.len(),
                counts.len()
            )));
        }
        counts
            .iter()
            .zip(&self.targets)
            .enumerate()
            .map(|(c, (&n, &t))| {
                t.checked_sub(n)
                    .ok_or_else(|| Error::invalid(format!("class {c}: target {t} is below current count {n}")))
            })
            .collect()
    }

    pub(crate) fn class_rng(&self, method: &str, class: usize) -> SeededRng {
        child_rng(self.seed, &format!("{method}/class{class}"))
    }
}

/// Where a synthetic row came from. Indices refer to rows of the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Copy { source: usize },
    Interpolated { p: usize, q: usize, lambda: f64 },
    Generated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceManifest {
    pub method: String,
    pub params: Value,
    pub seed: u64,
    pub synthetic_per_class: Vec<usize>,
    /// Notes such as fallbacks taken, in class order.
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Balanced {
    pub dataset: EncodedDataset,
    /// One entry per synthetic row, aligned with rows `n..` of `dataset`.
    pub provenance: Vec<Provenance>,
    pub manifest: BalanceManifest,
}

impl Balanced {
    pub fn original_len(&self) -> usize {
        self.dataset.len() - self.provenance.len()
    }
}

/// Synthetic rows collected for one class.
#[derive(Default)]
pub(crate) struct ClassBatch {
    pub rows: Vec<f64>,
    pub provenance: Vec<Provenance>,
    pub note: Option<String>,
}

/// Appends per-class batches (in class order) to the original dataset.
pub(crate) fn assemble(
    req: &BalanceRequest,
    method: &str,
    params: Value,
    batches: Vec<(usize, ClassBatch)>,
) -> Result<Balanced> {
    let d = req.dataset.feature_dim();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut provenance = Vec::new();
    let mut per_class = vec![0; req.dataset.num_classes];
    let mut notes = Vec::new();
    for (c, b) in batches {
        per_class[c] += b.provenance.len();
        labels.resize(labels.len() + b.provenance.len(), c);
        data.extend(b.rows);
        provenance.extend(b.provenance);
        if let Some(n) = b.note {
            notes.push(format!("class {c}: {n}"));
        }
    }
    let synth = Matrix::from_vec(labels.len(), d, data)?;
    let mut dataset = req.dataset.clone();
    dataset.extend(&synth, &labels)?;
    Ok(Balanced {
        dataset,
        provenance,
        manifest: BalanceManifest {
            method: method.to_string(),
            params,
            seed: req.seed,
            synthetic_per_class: per_class,
            notes,
        },
    })
}

/// Fills deficits with uniform draws (with replacement) from each class.
pub fn random_oversample(req: &BalanceRequest) -> Result<Balanced> {
    let deficits = req.deficits()?;
    let mut batches = Vec::new();
    for (c, &deficit) in deficits.iter().enumerate() {
        if deficit == 0 {
            continue;
        }
        let rows = req.dataset.indices_of(c);
        if rows.is_empty() {
            return Err(Error::invalid(format!(
                "class {c} needs {deficit} rows but has no samples"
            )));
        }
        let mut rng = req.class_rng("random", c);
        let mut b = ClassBatch::default();
        for _ in 0..deficit {
            let src = rows[rand::Rng::random_range(&mut rng, 0..rows.len())];
            b.rows.extend_from_slice(req.dataset.row(src));
            b.provenance.push(Provenance::Copy { source: src });
        }
        batches.push((c, b));
    }
    assemble(req, "random", json!({}), batches)
}

/// The interpolating and copying oversamplers with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Balancer {
    Random,
    Smote {
        #[serde(default = "default_k")]
        k: usize,
    },
    Borderline {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_m")]
        m: usize,
    },
    KmeansSmote {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_clusters")]
        n_clusters: usize,
        #[serde(default = "default_threshold")]
        imbalance_threshold: f64,
    },
    SvmSmote {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_penalty")]
        penalty: f64,
    },
}

fn default_k() -> usize {
    DEFAULT_K
}
fn default_m() -> usize {
    DEFAULT_M
}
fn default_clusters() -> usize {
    DEFAULT_CLUSTERS
}
fn default_threshold() -> f64 {
    DEFAULT_IMBALANCE_THRESHOLD
}
fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}

impl Balancer {
    pub fn smote() -> Self {
        Balancer::Smote { k: DEFAULT_K }
    }

    pub fn borderline() -> Self {
        Balancer::Borderline {
            k: DEFAULT_K,
            m: DEFAULT_M,
        }
    }

    pub fn kmeans_smote() -> Self {
        Balancer::KmeansSmote {
            k: DEFAULT_K,
            n_clusters: DEFAULT_CLUSTERS,
            imbalance_threshold: DEFAULT_IMBALANCE_THRESHOLD,
        }
    }

    pub fn svm_smote() -> Self {
        Balancer::SvmSmote {
            k: DEFAULT_K,
            penalty: DEFAULT_PENALTY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Balancer::Random => "random",
            Balancer::Smote { .. } => "smote",
            Balancer::Borderline { .. } => "borderline",
            Balancer::KmeansSmote { .. } => "kmeans_smote",
            Balancer::SvmSmote { .. } => "svm_smote",
        }
    }

    pub fn apply(&self, req: &BalanceRequest) -> Result<Balanced> {
        match *self {
            Balancer::Random => random_oversample(req),
            Balancer::Smote { k } => smote(req, k),
            Balancer::Borderline { k, m } => borderline_smote(req, k, m),
            Balancer::KmeansSmote {
                k,
                n_clusters,
                imbalance_threshold,
            } => kmeans_smote(req, k, n_clusters, imbalance_threshold),
            Balancer::SvmSmote { k, penalty } => svm_smote(req, k, penalty),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deficits() {
        assert_eq!(target_counts(&[10, 4, 6]).unwrap(), vec![0, 6, 4]);
        assert_eq!(target_counts(&[3, 3]).unwrap(), vec![0, 0]);
        assert!(target_counts(&[]).is_err());
    }

    #[test]
    fn random_copies_rows_of_the_same_class() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let d = EncodedDataset::new(x, vec![0, 0, 0, 1, 1], 2).unwrap();
        let out = random_oversample(&BalanceRequest::to_max(&d, 9).unwrap()).unwrap();
        assert_eq!(out.dataset.class_counts(), vec![3, 3]);
        assert_eq!(out.dataset.subset(&[0, 1, 2, 3, 4]), d);
        let Provenance::Copy { source } = out.provenance[0] else {
            panic!("expected a copy")
        };
        assert_eq!(d.labels[source], 1);
        assert_eq!(out.dataset.row(5), d.row(source));
        assert_eq!(out.manifest.synthetic_per_class, vec![0, 1]);
    }

    #[test]
    fn targets_below_counts_are_rejected() {
        let d = EncodedDataset::new(Matrix::zeros(3, 1), vec![0, 0, 1], 2).unwrap();
        let req = BalanceRequest {
            dataset: &d,
            targets: vec![1, 2],
            seed: 0,
        };
        assert!(random_oversample(&req).is_err());
    }

    #[test]
    fn balancer_config_parses_with_defaults() {
        let b: Balancer = serde_json::from_str(r#"{"method":"kmeans_smote","n_clusters":3}"#).unwrap();
        assert_eq!(
            b,
            Balancer::KmeansSmote {
                k: 5,
                n_clusters: 3,
                imbalance_threshold: 0.5
            }
        );
    }
}
