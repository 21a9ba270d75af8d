//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use c2bnvae_core::model::{CbnPlacement, NormKind};
use c2bnvae_core::nslkdd::{TEST_FILE, TRAIN_FILE};
use c2bnvae_core::seed::sha256_hex;
use c2bnvae_core::{Balancer, ModelConfig, TreeParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Default encoded width: 122 natural columns plus one zero pad column.
pub const DEFAULT_PAD_TO: usize = 123;

/// Rows of the results table, in display order.
pub const METHODS: [&str; 8] = [
    "original",
    "random",
    "smote",
    "borderline",
    "kmeans_smote",
    "svm_smote",
    "cvae",
    "c2bnvae",
];

pub fn display_name(method: &str) -> &str {
    match method {
        "original" => "Original imbalanced Data",
        "random" => "Random oversampling",
        "smote" => "SMOTE",
        "borderline" => "Borderline SMOTE",
        "kmeans_smote" => "KMeans SMOTE",
        "svm_smote" => "SVM SMOTE",
        "cvae" => "CVAE",
        "c2bnvae" => "C2BNVAE",
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    pub test: PathBuf,
    /// Attack-to-category CSV; the bundled table when absent.
    pub taxonomy: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            train: Path::new("data").join(TRAIN_FILE),
            test: Path::new("data").join(TEST_FILE),
            taxonomy: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Generator hyperparameters. Input width and class count come from the
/// data; the seed comes from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub latent_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_weight: f64,
    pub cbn_placement: CbnPlacement,
    pub leaky_slope: f64,
    pub norm_eps: f64,
    pub norm_momentum: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            latent_dim: d.latent_dim,
            hidden_widths: d.hidden_widths,
            lr: d.lr,
            epochs: d.epochs,
            batch_size: d.batch_size,
            kl_weight: d.kl_weight,
            cbn_placement: d.cbn_placement,
            leaky_slope: d.leaky_slope,
            norm_eps: d.norm_eps,
            norm_momentum: d.norm_momentum,
        }
    }
}

impl ModelSettings {
    pub fn to_model_config(&self, feature_dim: usize, num_classes: usize, norm: NormKind, seed: u64) -> ModelConfig {
        ModelConfig {
            feature_dim,
            num_classes,
            latent_dim: self.latent_dim,
            hidden_widths: self.hidden_widths.clone(),
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            kl_weight: self.kl_weight,
            cbn_placement: self.cbn_placement,
            norm,
            leaky_slope: self.leaky_slope,
            norm_eps: self.norm_eps,
            norm_momentum: self.norm_momentum,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Stratified fraction of the training file to keep, in (0, 1].
    pub subsample: f64,
    /// Encoded width after zero padding; 0 disables padding.
    pub pad_to: usize,
    /// Rows of `run-all` to compute, by method key.
    pub methods: Vec<String>,
    pub paths: Paths,
    pub model: ModelSettings,
    pub tree: TreeParams,
    /// Parameter overrides for the interpolating and copying oversamplers.
    pub balancers: Vec<Balancer>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            subsample: 1.0,
            pad_to: DEFAULT_PAD_TO,
            methods: METHODS.iter().map(|m| m.to_string()).collect(),
            paths: Paths::default(),
            model: ModelSettings::default(),
            tree: TreeParams::default(),
            balancers: vec![
                Balancer::Random,
                Balancer::smote(),
                Balancer::borderline(),
                Balancer::kmeans_smote(),
                Balancer::svm_smote(),
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(CliError::Usage(format!(
                "subsample must be in (0, 1], got {}",
                self.subsample
            )));
        }
        for (name, p) in [
            ("train", &self.paths.train),
            ("test", &self.paths.test),
            ("out", &self.paths.out),
        ] {
            if p.as_os_str().is_empty() {
                return Err(CliError::Usage(format!("paths.{name} is empty")));
            }
        }
        if self.paths.taxonomy.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
            return Err(CliError::Usage("paths.taxonomy is empty".into()));
        }
        for m in &self.methods {
            if !METHODS.contains(&m.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown method {m:?}; expected one of {}",
                    METHODS.join(", ")
                )));
            }
        }
        self.tree.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let probe = self
            .model
            .to_model_config(self.pad_to.max(1), 2, NormKind::Conditional, 0);
        probe.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn pad_to(&self) -> Option<usize> {
        (self.pad_to > 0).then_some(self.pad_to)
    }

    /// Settings for an oversampling method: the `[[balancers]]` entry if
    /// present, else the defaults. `None` for the non-oversampling rows.
    pub fn balancer(&self, method: &str) -> Option<Balancer> {
        if let Some(b) = self.balancers.iter().find(|b| b.name() == method) {
            return Some(b.clone());
        }
        Some(match method {
            "random" => Balancer::Random,
            "smote" => Balancer::smote(),
            "borderline" => Balancer::borderline(),
            "kmeans_smote" => Balancer::kmeans_smote(),
            "svm_smote" => Balancer::svm_smote(),
            _ => return None,
        })
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    /// The output directory is left out: it does not affect any result.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.out = PathBuf::new();
        sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }
}
