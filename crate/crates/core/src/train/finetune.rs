//! Fine-tuning loop: load pretrained encoder weights, train heads and
//! encoder end-to-end with the supervised + disagreement loss, track
//! validation AUC, keep the best-validation parameters, and report the
//! test AUC of that checkpoint.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::adam::{adam_step, clip_global_norm, AdamState};
use super::batch::{pack_batch, PreparedMolecule};
use super::metrics::roc_auc;
use super::schedule::noam_lr;
use super::split::{split_dataset, SplitSpec};
use super::TrainError;
use crate::model::{
    bind, collect_grads, finetune_forward, finetune_loss, init_finetune_params, DropoutCtx,
    ModelConfig, ParamStore,
};
use crate::real::Real;
use crate::rng::SplitRng;
use crate::tensor::Tape;

/// A molecule with per-task binary labels; `None` marks a missing label.
#[derive(Debug, Clone)]
pub struct LabeledMolecule {
    pub prepared: PreparedMolecule,
    pub labels: Vec<Option<bool>>,
}

#[derive(Debug, Clone)]
pub struct FinetuneSettings {
    pub epochs: u64,
    pub batch_size: usize,
    pub warmup: u64,
    pub lr_factor: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub use_descriptors: bool,
}

impl Default for FinetuneSettings {
    fn default() -> Self {
        FinetuneSettings {
            epochs: 30,
            batch_size: 32,
            warmup: 4000,
            lr_factor: 1.0,
            grad_clip: 5.0,
            seed: 0,
            use_descriptors: false,
        }
    }
}

/// One trace record: `epoch<TAB>train_loss<TAB>valid_auc<TAB>test_auc`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneRecord {
    pub epoch: u64,
    pub train_loss: f64,
    pub valid_auc: f64,
    pub test_auc: f64,
    /// Mean disagreement term over the epoch's training batches (not part
    /// of the trace line).
    pub disagreement: f64,
}

impl FinetuneRecord {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.epoch, self.train_loss, self.valid_auc, self.test_auc
        )
    }
}

pub trait FinetuneHook {
    fn on_epoch(&mut self, _record: &FinetuneRecord) {}
}

pub struct NoFinetuneHook;

impl FinetuneHook for NoFinetuneHook {}

pub struct FinetuneResult<R: Real> {
    /// Parameters of the best-validation epoch.
    pub params: ParamStore<R>,
    pub records: Vec<FinetuneRecord>,
    pub best_epoch: u64,
    pub best_valid_auc: f64,
    /// Test AUC of the best-validation parameters.
    pub test_auc: f64,
    /// Per-task test AUC of the best parameters; None for skipped
    /// single-class tasks.
    pub per_task_test_auc: Vec<Option<f64>>,
}

fn label_matrix(batch: &[&LabeledMolecule], n_tasks: usize) -> (Vec<f64>, Vec<bool>) {
    let mut labels = Vec::with_capacity(batch.len() * n_tasks);
    let mut present = Vec::with_capacity(batch.len() * n_tasks);
    for m in batch {
        for t in 0..n_tasks {
            match m.labels.get(t).copied().flatten() {
                Some(v) => {
                    labels.push(if v { 1.0 } else { 0.0 });
                    present.push(true);
                }
                None => {
                    labels.push(0.0);
                    present.push(false);
                }
            }
        }
    }
    (labels, present)
}

/// Averaged-branch prediction scores for a set of molecules,
/// `n_mols x n_tasks` row-major.
pub fn predict_scores<R: Real>(
    data: &[&LabeledMolecule],
    params: &ParamStore<R>,
    config: &ModelConfig,
    with_desc: bool,
    batch_size: usize,
) -> Result<Vec<f64>, TrainError> {
    let mut scores = Vec::new();
    for chunk in data.chunks(batch_size.max(1)) {
        let mols: Vec<&PreparedMolecule> = chunk.iter().map(|m| &m.prepared).collect();
        let batch = pack_batch(&mols);
        let inputs = batch.finetune_inputs(&mols, with_desc);
        let mut tape: Tape<R> = Tape::new();
        let bound = bind(&mut tape, params);
        let preds = finetune_forward(&mut tape, &inputs, &bound, config, None)?;
        scores.extend(tape.value(preds.p_final).iter().map(|v| v.to_f64()));
    }
    Ok(scores)
}

/// Mean AUC over tasks; single-class tasks are skipped (`None`).
pub fn evaluate_auc<R: Real>(
    data: &[&LabeledMolecule],
    params: &ParamStore<R>,
    config: &ModelConfig,
    n_tasks: usize,
    with_desc: bool,
    batch_size: usize,
) -> Result<(f64, Vec<Option<f64>>), TrainError> {
    let scores = predict_scores(data, params, config, with_desc, batch_size)?;
    let mut per_task = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let mut task_scores = Vec::new();
        let mut task_labels = Vec::new();
        for (i, m) in data.iter().enumerate() {
            if let Some(Some(l)) = m.labels.get(t) {
                task_scores.push(scores[i * n_tasks + t]);
                task_labels.push(*l);
            }
        }
        match roc_auc(&task_scores, &task_labels) {
            Ok(a) => per_task.push(Some(a)),
            Err(TrainError::SingleClass) => per_task.push(None),
            Err(e) => return Err(e),
        }
    }
    let valid: Vec<f64> = per_task.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(TrainError::SingleClass);
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok((mean, per_task))
}

#[allow(clippy::too_many_arguments)]
pub fn finetune_loop<R: Real, H: FinetuneHook>(
    data: &[LabeledMolecule],
    n_tasks: usize,
    pretrained: &ParamStore<R>,
    config: &ModelConfig,
    settings: &FinetuneSettings,
    split: &SplitSpec,
    hook: &mut H,
) -> Result<FinetuneResult<R>, TrainError> {
    config.validate().map_err(TrainError::ConfigMismatch)?;
    if n_tasks == 0 {
        return Err(TrainError::ConfigMismatch("no tasks".into()));
    }
    let (train_idx, valid_idx, test_idx) = split_dataset(data.len(), split)?;
    let train: Vec<&LabeledMolecule> = train_idx.iter().map(|&i| &data[i]).collect();
    let valid: Vec<&LabeledMolecule> = valid_idx.iter().map(|&i| &data[i]).collect();
    let test: Vec<&LabeledMolecule> = test_idx.iter().map(|&i| &data[i]).collect();

    let mut params = init_finetune_params(
        config,
        settings.seed,
        n_tasks,
        settings.use_descriptors,
        Some(pretrained),
    )
    .map_err(TrainError::ConfigMismatch)?;
    let mut adam = AdamState::new(&params);
    let root = SplitRng::new(settings.seed);

    let mut best: Option<(f64, u64, ParamStore<R>)> = None;
    let mut records = Vec::new();
    let mut global_step = 0u64;
    let b = settings.batch_size.max(1);

    for epoch in 1..=settings.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        root.derive("finetune-order")
            .derive_index(epoch)
            .stream()
            .shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut diss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(b) {
            let batch_mols: Vec<&LabeledMolecule> = chunk.iter().map(|&i| train[i]).collect();
            let (labels, present) = label_matrix(&batch_mols, n_tasks);
            if !present.iter().any(|&p| p) {
                continue;
            }
            let mols: Vec<&PreparedMolecule> = batch_mols.iter().map(|m| &m.prepared).collect();
            let packed = pack_batch(&mols);
            let inputs = packed.finetune_inputs(&mols, settings.use_descriptors);

            global_step += 1;
            let mut drop_ctx = (config.dropout > 0.0).then(|| DropoutCtx {
                rate: config.dropout,
                stream: root.derive("finetune-dropout").derive_index(global_step).stream(),
            });

            let mut tape: Tape<R> = Tape::new();
            let bound = bind(&mut tape, &params);
            let preds =
                finetune_forward(&mut tape, &inputs, &bound, config, drop_ctx.as_mut())?;
            let out = finetune_loss(&mut tape, preds.p_node, preds.p_edge, &labels, &present)?;
            let loss = tape.value(out.total)[0].to_f64();
            if !loss.is_finite() {
                return Err(TrainError::NumericFailure {
                    step: global_step,
                    loss,
                });
            }
            tape.backward(out.total).map_err(crate::model::ModelError::from)?;
            let mut grads = collect_grads(&tape, &bound);
            drop(tape);

            clip_global_norm(&mut grads, settings.grad_clip);
            let lr = settings.lr_factor * noam_lr(global_step, config.hidden, settings.warmup)?;
            adam_step(&mut params, &grads, &mut adam, lr)?;

            loss_sum += loss;
            diss_sum += out.disagreement;
            n_batches += 1;
        }

        let (valid_auc, _) = evaluate_auc(&valid, &params, config, n_tasks, settings.use_descriptors, b)?;
        let (test_auc, _) = evaluate_auc(&test, &params, config, n_tasks, settings.use_descriptors, b)?;
        let record = FinetuneRecord {
            epoch,
            train_loss: loss_sum / n_batches.max(1) as f64,
            valid_auc,
            test_auc,
            disagreement: diss_sum / n_batches.max(1) as f64,
        };
        hook.on_epoch(&record);
        records.push(record);

        let improved = best.as_ref().map_or(true, |(bv, _, _)| valid_auc > *bv);
        if improved {
            best = Some((valid_auc, epoch, params.clone()));
        }
    }

    let (best_valid_auc, best_epoch, best_params) = best.expect("at least one epoch");
    let (test_auc, per_task_test_auc) =
        evaluate_auc(&test, &best_params, config, n_tasks, settings.use_descriptors, b)?;
    Ok(FinetuneResult {
        params: best_params,
        records,
        best_epoch,
        best_valid_auc,
        test_auc,
        per_task_test_auc,
    })
}
