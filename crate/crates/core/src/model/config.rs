//! Architecture hyperparameters shared by pre-training and fine-tuning.

use alloc::format;
use alloc::string::String;

use crate::molgraph::{F_DUAL, F_EDGE, F_NODE};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Hidden size d. Must be even (sinusoidal positions) and divisible by
    /// `heads`.
    pub hidden: usize,
    /// Encoder depth N.
    pub encoder_blocks: usize,
    /// Decoder depth M; the architecture is asymmetric, M < N.
    pub decoder_blocks: usize,
    /// Attention heads per block.
    pub heads: usize,
    /// Message-passing rounds per GNN stack.
    pub gnn_steps: usize,
    /// Mask ratio for both branches, in (0, 1).
    pub mask_ratio: f64,
    pub f_node: usize,
    pub f_edge: usize,
    pub f_dual: usize,
    /// Self-attentive readout sizes (fine-tuning).
    pub attn_hidden: usize,
    pub attn_out: usize,
    /// Dropout rate on block outputs during training; 0 disables.
    pub dropout: f64,
}

impl Default for ModelConfig {
    /// The reference configuration: hidden 100, 6 encoder and 2 decoder
    /// blocks, 2 heads, 3 GNN rounds, mask ratio 0.6.
    fn default() -> Self {
        ModelConfig {
            hidden: 100,
            encoder_blocks: 6,
            decoder_blocks: 2,
            heads: 2,
            gnn_steps: 3,
            mask_ratio: 0.6,
            f_node: F_NODE,
            f_edge: F_EDGE,
            f_dual: F_DUAL,
            attn_hidden: 64,
            attn_out: 2,
            dropout: 0.0,
        }
    }
}

impl ModelConfig {
    /// Small configuration for desk-scale experiments and tests.
    pub fn tiny(hidden: usize) -> Self {
        ModelConfig {
            hidden,
            encoder_blocks: 2,
            decoder_blocks: 1,
            heads: 2,
            gnn_steps: 2,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.hidden == 0 || self.hidden % 2 != 0 {
            return Err(format!("hidden size must be positive and even, got {}", self.hidden));
        }
        if self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(format!(
                "hidden size {} must be divisible by heads {}",
                self.hidden, self.heads
            ));
        }
        if self.decoder_blocks < 1 {
            return Err("decoder needs at least one block".into());
        }
        if self.decoder_blocks >= self.encoder_blocks {
            return Err(format!(
                "asymmetry requires decoder blocks {} < encoder blocks {}",
                self.decoder_blocks, self.encoder_blocks
            ));
        }
        if self.gnn_steps == 0 {
            return Err("gnn_steps must be at least 1".into());
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(format!("mask ratio {} outside (0, 1)", self.mask_ratio));
        }
        if self.f_node == 0 || self.f_edge == 0 || self.f_dual == 0 {
            return Err("feature sizes must be positive".into());
        }
        if self.attn_hidden == 0 || self.attn_out == 0 {
            return Err("readout sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::tiny(32).validate().unwrap();
    }

    #[test]
    fn rejects_symmetric_decoder() {
        let cfg = ModelConfig {
            decoder_blocks: 6,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_zero_decoder() {
        let cfg = ModelConfig {
            decoder_blocks: 0,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_indivisible_heads() {
        let cfg = ModelConfig {
            hidden: 10,
            heads: 4,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
