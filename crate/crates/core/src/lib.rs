//! Dual-conditional VAE for synthesizing minority-class network traffic
//! records, with the surrounding evaluation pipeline: NSL-KDD ingestion,
//! baseline oversamplers, a CART classifier, weighted detection metrics,
//! and parameter/FLOP accounting.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
mod binio;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod nslkdd;
pub mod seed;
pub mod tree;

pub use balance::{BalanceRequest, Balanced, Balancer};
pub use dataset::EncodedDataset;
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use model::{C2bnVae, ModelCheckpoint, ModelConfig};
pub use nn::Matrix;
pub use nslkdd::{ClassTaxonomy, EncodingSchema, RawRecord};
pub use tree::{DecisionTree, TreeParams};
