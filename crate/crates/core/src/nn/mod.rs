//! Minimal dense neural-network substrate: matrices, layer kernels, a
//! reverse-mode gradient tape, initialization, Adam, losses, and cost
//! accounting.

pub mod adam;
pub mod cost;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod matrix;
pub mod params;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use cost::{count_params_flops, ArchDescriptor, ComponentSpec, Cost, CostReport, LayerSpec};
pub use init::he_init;
pub use layers::{batchnorm_forward, cbn_forward, leaky_relu, linear_forward, BatchNorm, CbnParamBank, LinearLayer};
pub use loss::{kl_gaussian, mse_loss};
pub use matrix::{one_hot, sq_dist, Matrix};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, NormBatchStats, Tape, Var};
