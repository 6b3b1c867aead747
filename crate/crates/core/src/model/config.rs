use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Precision;
use crate::types::{FRAME_WIDTH, SKELETON_WIDTH};

/// Encoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub input_width: usize,
    pub output_width: usize,
    pub window: usize,
    pub layer_norm_eps: f64,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::full(246)
    }
}

impl ModelConfig {
    /// 512-wide, 8 layers, 8 heads.
    pub fn full(input_width: usize) -> ModelConfig {
        ModelConfig {
            d_model: 512,
            layers: 8,
            heads: 8,
            ff_dim: 2048,
            dropout: 0.1,
            input_width,
            output_width: SKELETON_WIDTH,
            window: 100,
            layer_norm_eps: 1e-5,
            precision: Precision::F32,
            seed: 0,
        }
    }

    /// 64-wide, 2 layers, 4 heads: small enough for tests and CI.
    pub fn desk(input_width: usize) -> ModelConfig {
        ModelConfig {
            d_model: 64,
            layers: 2,
            heads: 4,
            ff_dim: 256,
            ..ModelConfig::full(input_width)
        }
    }

    /// Named preset lookup: `full` or `desk`.
    pub fn preset(name: &str, input_width: usize) -> Result<ModelConfig> {
        match name {
            "full" => Ok(ModelConfig::full(input_width)),
            "desk" => Ok(ModelConfig::desk(input_width)),
            other => Err(Error::Config(format!("unknown model preset {other:?} (expected full or desk)"))),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Parameter(m));
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 {
            return err("d_model, heads and layers must be positive".into());
        }
        if self.d_model % self.heads != 0 {
            return err(format!("d_model {} is not divisible by heads {}", self.d_model, self.heads));
        }
        if self.ff_dim == 0 || self.input_width == 0 || self.output_width == 0 || self.window == 0 {
            return err("ff_dim, widths and window must be positive".into());
        }
        if self.input_width != FRAME_WIDTH && self.input_width != 3 * FRAME_WIDTH {
            return err(format!(
                "input_width {} must be {FRAME_WIDTH} or {}",
                self.input_width,
                3 * FRAME_WIDTH
            ));
        }
        if self.output_width != SKELETON_WIDTH {
            return err(format!("output_width {} must be {SKELETON_WIDTH}", self.output_width));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if !(self.layer_norm_eps > 0.0) {
            return err("layer_norm_eps must be positive".into());
        }
        Ok(())
    }
}
