//! Parameter and FLOP accounting.
//!
//! Counting convention (per sample, inference):
//!
//! * linear `in → out`: `in·out + out` parameters, `in·out` FLOPs (one
//!   multiply-accumulate counts as one FLOP, bias adds are free);
//! * activations are free;
//! * normalization of width `w`: `2w` parameters (one affine pair) and `4w`
//!   FLOPs (subtract, scale, multiply, add per feature).
//!
//! A conditional normalization layer actually stores one affine pair per
//! class; that larger figure is reported separately as `trainable_params`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Linear {
        input: usize,
        output: usize,
    },
    /// `classes = 1` for plain batch norm.
    Norm {
        width: usize,
        classes: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub components: Vec<ComponentSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    /// Parameters under the one-affine-pair normalization convention.
    pub params: u64,
    /// Parameters actually held, counting every class's affine pair.
    pub trainable_params: u64,
    pub flops: u64,
}

impl std::ops::Add for Cost {
    type Output = Cost;

    fn add(self, o: Cost) -> Cost {
        Cost {
            params: self.params + o.params,
            trainable_params: self.trainable_params + o.trainable_params,
            flops: self.flops + o.flops,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub components: Vec<(String, Cost)>,
    pub total: Cost,
}

impl CostReport {
    pub fn component(&self, name: &str) -> Option<Cost> {
        self.components.iter().find(|(n, _)| n == name).map(|(_, c)| *c)
    }
}

pub fn layer_cost(layer: &LayerSpec) -> Cost {
    match *layer {
        LayerSpec::Linear { input, output } => {
            let (i, o) = (input as u64, output as u64);
            Cost {
                params: i * o + o,
                trainable_params: i * o + o,
                flops: i * o,
            }
        }
        LayerSpec::Norm { width, classes } => {
            let w = width as u64;
            Cost {
                params: 2 * w,
                trainable_params: 2 * w * classes.max(1) as u64,
                flops: 4 * w,
            }
        }
    }
}

pub fn count_params_flops(arch: &ArchDescriptor) -> CostReport {
    let components: Vec<(String, Cost)> = arch
        .components
        .iter()
        .map(|c| {
            (
                c.name.clone(),
                c.layers.iter().map(layer_cost).fold(Cost::default(), |a, b| a + b),
            )
        })
        .collect();
    let total = components.iter().fold(Cost::default(), |a, (_, c)| a + *c);
    CostReport { components, total }
}
