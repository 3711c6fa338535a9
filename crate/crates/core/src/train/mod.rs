//! Optimization and evaluation: Adam with the Noam schedule, seeded
//! splitting, block-diagonal batching, ROC-AUC, and the pre-training,
//! fine-tuning, and ablation loops.

mod ablate;
mod adam;
mod batch;
mod finetune;
mod metrics;
mod pretrain;
mod schedule;
mod split;

pub use ablate::{ablate_mask_ratio, contains_oxygen, AblationRow};
pub use adam::{adam_step, clip_global_norm, AdamState, ADAM_EPS, BETA1, BETA2};
pub use batch::{
    mask_dual_branch, mask_node_branch, pack_batch, pack_dual_graphs, pack_node_graphs,
    sample_branch_plans, Batch, BranchPlans, MaskedPackedBranch, PackedBranch, PreparedMolecule,
};
pub use finetune::{
    evaluate_auc, finetune_loop, predict_scores, FinetuneHook, FinetuneRecord, FinetuneResult,
    FinetuneSettings, LabeledMolecule, NoFinetuneHook,
};
pub use metrics::{roc_auc, roc_auc_pair_oracle};
pub use pretrain::{
    masked_reconstruction_eval, pretrain_loop, EvalGroup, MaskedEvalReport, NoHook, PretrainHook,
    PretrainRecord, PretrainResult, PretrainSettings,
};
pub(crate) use pretrain::masked_step_forward;
pub use schedule::noam_lr;
pub use split::{split_dataset, SplitSpec};

use alloc::string::String;

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("schedule step must be positive")]
    NonPositiveStep,
    #[error("too few items: {n}")]
    TooFewItems { n: usize },
    #[error("metric needs both classes present")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("non-finite loss {loss} at step {step}")]
    NumericFailure { step: u64, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
