//! Run configuration: a flat `key = value` text document plus a few CLI
//! overrides. Defaults follow the reference setup (hidden 100, 6 encoder /
//! 2 decoder blocks, 2 heads, 3 GNN rounds, mask ratio 0.6, batch 32).

use std::collections::BTreeMap;
use std::path::Path;

use molmae_core::model::ModelConfig;
use molmae_core::train::{FinetuneSettings, PretrainSettings};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hidden: usize,
    pub encoder_blocks: usize,
    pub decoder_blocks: usize,
    pub heads: usize,
    pub gnn_steps: usize,
    pub mask_ratio: f64,
    pub attn_hidden: usize,
    pub attn_out: usize,
    pub dropout: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub steps: u64,
    pub epochs: u64,
    pub warmup: u64,
    pub lr_factor: f64,
    pub grad_clip: f64,
    pub precision: Precision,
    pub deterministic: bool,
    pub use_descriptors: bool,
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hidden: 100,
            encoder_blocks: 6,
            decoder_blocks: 2,
            heads: 2,
            gnn_steps: 3,
            mask_ratio: 0.6,
            attn_hidden: 64,
            attn_out: 2,
            dropout: 0.0,
            seed: 0,
            batch_size: 32,
            steps: 500,
            epochs: 30,
            warmup: 4000,
            lr_factor: 1.0,
            grad_clip: 5.0,
            precision: Precision::F32,
            deterministic: false,
            use_descriptors: false,
            checkpoint_every: 0,
        }
    }
}

/// The documented configuration keys, shown in `--help`.
pub const CONFIG_KEY_HELP: &str = "\
Configuration file keys (one `key = value` per line, `#` comments):
  hidden            model hidden size d (even, divisible by heads; default 100)
  encoder_blocks    encoder depth N (default 6)
  decoder_blocks    decoder depth M < N (default 2)
  heads             attention heads per block (default 2)
  gnn_steps         message-passing rounds per GNN stack (default 3)
  mask_ratio        node/edge mask ratio in (0,1) (default 0.6)
  attn_hidden       readout hidden size (default 64)
  attn_out          readout attention rows (default 2)
  dropout           dropout rate on block outputs (default 0)
  seed              run seed (default 0; --seed overrides)
  batch_size        molecules per optimization step (default 32)
  steps             pre-training steps (default 500)
  epochs            fine-tuning epochs (default 30)
  warmup            Noam warmup steps (default 4000)
  lr_factor         multiplier on the Noam rate (default 1.0)
  grad_clip         global gradient-norm clip (default 5.0)
  precision         f32 | f64 (default f32)
  deterministic     true | false (default false; --deterministic overrides)
  use_descriptors   concatenate molecule descriptors at fine-tuning
  checkpoint_every  also save a checkpoint every N steps (0 = final only)";

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true/false, got {v}"))),
    }
}

impl RunConfig {
    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |k: &str, v: &str| CliError::Config(format!("{k}: cannot parse value {v}"));
        match key {
            "hidden" => self.hidden = value.parse().map_err(|_| bad(key, value))?,
            "encoder_blocks" => self.encoder_blocks = value.parse().map_err(|_| bad(key, value))?,
            "decoder_blocks" => self.decoder_blocks = value.parse().map_err(|_| bad(key, value))?,
            "heads" => self.heads = value.parse().map_err(|_| bad(key, value))?,
            "gnn_steps" => self.gnn_steps = value.parse().map_err(|_| bad(key, value))?,
            "mask_ratio" => self.mask_ratio = value.parse().map_err(|_| bad(key, value))?,
            "attn_hidden" => self.attn_hidden = value.parse().map_err(|_| bad(key, value))?,
            "attn_out" => self.attn_out = value.parse().map_err(|_| bad(key, value))?,
            "dropout" => self.dropout = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad(key, value))?,
            "steps" => self.steps = value.parse().map_err(|_| bad(key, value))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key, value))?,
            "warmup" => self.warmup = value.parse().map_err(|_| bad(key, value))?,
            "lr_factor" => self.lr_factor = value.parse().map_err(|_| bad(key, value))?,
            "grad_clip" => self.grad_clip = value.parse().map_err(|_| bad(key, value))?,
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(bad(key, value)),
                }
            }
            "deterministic" => self.deterministic = parse_bool(key, value)?,
            "use_descriptors" => self.use_descriptors = parse_bool(key, value)?,
            "checkpoint_every" => {
                self.checkpoint_every = value.parse().map_err(|_| bad(key, value))?
            }
            _ => return Err(CliError::Config(format!("unknown configuration key {key}"))),
        }
        Ok(())
    }

    /// Parse a flat key-value document on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            config.apply_pair(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model_config()
            .validate()
            .map_err(CliError::Config)?;
        if self.batch_size == 0 {
            return Err(CliError::Config("batch_size must be positive".into()));
        }
        if self.warmup == 0 {
            return Err(CliError::Config("warmup must be positive".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden,
            encoder_blocks: self.encoder_blocks,
            decoder_blocks: self.decoder_blocks,
            heads: self.heads,
            gnn_steps: self.gnn_steps,
            mask_ratio: self.mask_ratio,
            attn_hidden: self.attn_hidden,
            attn_out: self.attn_out,
            dropout: self.dropout,
            ..ModelConfig::default()
        }
    }

    pub fn pretrain_settings(&self) -> PretrainSettings {
        PretrainSettings {
            steps: self.steps,
            batch_size: self.batch_size,
            warmup: self.warmup,
            lr_factor: self.lr_factor,
            grad_clip: self.grad_clip,
            seed: self.seed,
        }
    }

    pub fn finetune_settings(&self) -> FinetuneSettings {
        FinetuneSettings {
            epochs: self.epochs,
            batch_size: self.batch_size,
            warmup: self.warmup,
            lr_factor: self.lr_factor,
            grad_clip: self.grad_clip,
            seed: self.seed,
            use_descriptors: self.use_descriptors,
        }
    }

    /// Stable key-value echo, embedded in checkpoint manifests.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let b = |v: bool| if v { "true" } else { "false" };
        vec![
            ("hidden".into(), self.hidden.to_string()),
            ("encoder_blocks".into(), self.encoder_blocks.to_string()),
            ("decoder_blocks".into(), self.decoder_blocks.to_string()),
            ("heads".into(), self.heads.to_string()),
            ("gnn_steps".into(), self.gnn_steps.to_string()),
            ("mask_ratio".into(), self.mask_ratio.to_string()),
            ("attn_hidden".into(), self.attn_hidden.to_string()),
            ("attn_out".into(), self.attn_out.to_string()),
            ("dropout".into(), self.dropout.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("steps".into(), self.steps.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("warmup".into(), self.warmup.to_string()),
            ("lr_factor".into(), self.lr_factor.to_string()),
            ("grad_clip".into(), self.grad_clip.to_string()),
            (
                "precision".into(),
                match self.precision {
                    Precision::F32 => "f32".into(),
                    Precision::F64 => "f64".into(),
                },
            ),
            ("deterministic".into(), b(self.deterministic).into()),
            ("use_descriptors".into(), b(self.use_descriptors).into()),
            ("checkpoint_every".into(), self.checkpoint_every.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut config = RunConfig::default();
        for (k, v) in pairs {
            config.apply_pair(k, v)?;
        }
        Ok(config)
    }
}
