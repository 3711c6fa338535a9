//! The bi-branch masked autoencoder: asymmetric encoder/decoder per
//! branch, reconstruction and fine-tuning losses, and parameter
//! accounting.

mod branch;
mod config;
mod finetune;
mod loss;
mod params;

pub use branch::{decode_branch, encode_branch, Branch, BranchOutput, DropoutCtx};
pub use config::ModelConfig;
pub use finetune::{finetune_forward, self_attentive_readout, FinetuneGraphInputs, FinetunePreds};
pub use loss::{
    finetune_loss, masked_reconstruction_loss, pretrain_loss, BranchLoss, FinetuneLossOutput,
    GroupStat, PretrainLossOutput,
};
pub use params::{
    bind, block_tensors, collect_grads, count_parameters, init_finetune_params,
    init_pretrain_params, stack_tensors, Bound, ParamCount, ParamEntry, ParamStore,
};

use alloc::string::String;

use crate::masking::MaskError;
use crate::nn::NnError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("mask set is empty; nothing to reconstruct")]
    EmptyMaskSet,
    #[error("all labels missing; nothing to supervise")]
    AllLabelsMissing,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
