//! Pre-training loop: per step, sample per-molecule mask plans, encode the
//! visible subgraphs, reorder with mask tokens, decode over the full
//! topology, score the reconstruction, and take one clipped Adam step at
//! the Noam rate. Everything is driven by counter-based streams derived
//! from one run seed, so runs are bit-reproducible.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::adam::{adam_step, clip_global_norm, AdamState};
use super::batch::{
    mask_dual_branch, mask_node_branch, pack_batch, sample_branch_plans, PreparedMolecule,
};
use super::schedule::noam_lr;
use super::TrainError;
use crate::masking::scatter_with_tokens;
use crate::model::{
    bind, decode_branch, encode_branch, init_pretrain_params, pretrain_loss, Bound, Branch,
    DropoutCtx, GroupStat, ModelConfig, ParamStore, PretrainLossOutput,
};
use crate::molgraph::{dual_feature_groups, node_feature_groups, FeatureGroup};
use crate::nn::positional_encoding_tensor;
use crate::real::Real;
use crate::rng::SplitRng;
use crate::tensor::Tape;

#[derive(Debug, Clone)]
pub struct PretrainSettings {
    pub steps: u64,
    pub batch_size: usize,
    pub warmup: u64,
    pub lr_factor: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        PretrainSettings {
            steps: 500,
            batch_size: 32,
            warmup: 4000,
            lr_factor: 1.0,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

/// One trace record: `step<TAB>loss<TAB>node_acc<TAB>edge_acc`. The loss
/// is the reconstruction total averaged over the batch's molecules; the
/// accuracies are macro-averages over each branch's feature groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainRecord {
    pub step: u64,
    pub loss: f64,
    pub node_acc: f64,
    pub edge_acc: f64,
}

impl PretrainRecord {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.step, self.loss, self.node_acc, self.edge_acc
        )
    }
}

/// Step callback; gets the fresh record and the updated parameters.
pub trait PretrainHook<R: Real> {
    fn on_step(&mut self, _record: &PretrainRecord, _params: &ParamStore<R>) {}
}

/// No-op hook.
pub struct NoHook;

impl<R: Real> PretrainHook<R> for NoHook {}

pub struct PretrainResult<R: Real> {
    pub params: ParamStore<R>,
    pub records: Vec<PretrainRecord>,
}

fn macro_accuracy(groups: &[GroupStat]) -> f64 {
    if groups.is_empty() {
        return 0.0;
    }
    groups.iter().map(|g| g.accuracy()).sum::<f64>() / groups.len() as f64
}

/// Full masked forward pass over one batch: both branches encoded on their
/// visible subgraphs, reordered with mask tokens and positions, decoded
/// over full topology, and scored.
pub(crate) fn masked_step_forward<'s, R: Real>(
    mols: &[&PreparedMolecule],
    config: &ModelConfig,
    store: &'s ParamStore<R>,
    node_seeds: &[u64],
    edge_seeds: &[u64],
    mut dropout: Option<&mut DropoutCtx>,
) -> Result<(Tape<R>, Bound<'s, R>, PretrainLossOutput), TrainError> {
    let batch = pack_batch(mols);
    let node_plans = sample_branch_plans(mols, config.mask_ratio, node_seeds, false)?;
    let dual_plans = sample_branch_plans(mols, config.mask_ratio, edge_seeds, true)?;
    let node_masked = mask_node_branch(mols, &batch.node, &node_plans)?;
    let dual_masked = mask_dual_branch(mols, &batch.dual, &dual_plans)?;

    let mut tape = Tape::new();
    let bound = bind(&mut tape, store);

    let enc_n = encode_branch(
        &mut tape,
        &node_masked.visible_graph,
        &bound,
        Branch::Node,
        config,
        dropout.as_deref_mut(),
    )?;
    let placed_n = scatter_with_tokens(
        &mut tape,
        enc_n.final_tokens,
        &node_masked.visible_packed,
        batch.node.graph.n_tokens,
        bound.t("node.mask_token"),
    )
    .map_err(crate::model::ModelError::from)?;
    let pos_n = positional_encoding_tensor(&mut tape, &batch.node.graph.positions, config.hidden)
        .map_err(crate::model::ModelError::from)?;
    let full_n = tape.add(placed_n, pos_n).map_err(crate::model::ModelError::from)?;
    let logits_n = decode_branch(
        &mut tape,
        full_n,
        &batch.node.graph,
        &bound,
        Branch::Node,
        config,
        dropout.as_deref_mut(),
    )?;

    let enc_e = encode_branch(
        &mut tape,
        &dual_masked.visible_graph,
        &bound,
        Branch::Edge,
        config,
        dropout.as_deref_mut(),
    )?;
    let placed_e = scatter_with_tokens(
        &mut tape,
        enc_e.final_tokens,
        &dual_masked.visible_packed,
        batch.dual.graph.n_tokens,
        bound.t("edge.mask_token"),
    )
    .map_err(crate::model::ModelError::from)?;
    let pos_e = positional_encoding_tensor(&mut tape, &batch.dual.graph.positions, config.hidden)
        .map_err(crate::model::ModelError::from)?;
    let full_e = tape.add(placed_e, pos_e).map_err(crate::model::ModelError::from)?;
    let logits_e = decode_branch(
        &mut tape,
        full_e,
        &batch.dual.graph,
        &bound,
        Branch::Edge,
        config,
        dropout,
    )?;

    let node_targets = batch.node.graph.features_tensor(&mut tape);
    let edge_targets = batch.dual.graph.features_tensor(&mut tape);
    let out = pretrain_loss(
        &mut tape,
        logits_n,
        node_targets,
        &node_masked.masked_packed,
        logits_e,
        edge_targets,
        &dual_masked.masked_packed,
        &node_feature_groups(),
        &dual_feature_groups(),
    )?;
    Ok((tape, bound, out))
}

pub(crate) fn mask_seeds_for(
    root: &SplitRng,
    label: &str,
    step: u64,
    n: usize,
) -> Vec<u64> {
    let stream = root.derive(label).derive_index(step);
    (0..n).map(|i| stream.u64_at(i as u64)).collect()
}

pub fn pretrain_loop<R: Real, H: PretrainHook<R>>(
    corpus: &[PreparedMolecule],
    config: &ModelConfig,
    settings: &PretrainSettings,
    hook: &mut H,
) -> Result<PretrainResult<R>, TrainError> {
    config
        .validate()
        .map_err(TrainError::ConfigMismatch)?;
    let usable: Vec<&PreparedMolecule> = corpus.iter().filter(|m| m.is_maskable()).collect();
    if usable.is_empty() {
        return Err(TrainError::TooFewItems { n: 0 });
    }

    let root = SplitRng::new(settings.seed);
    let mut params: ParamStore<R> = init_pretrain_params(config, settings.seed);
    let mut adam = AdamState::new(&params);
    let mut records = Vec::with_capacity(settings.steps as usize);

    let n = usable.len();
    let b = settings.batch_size.max(1).min(n);
    let steps_per_epoch = n.div_ceil(b) as u64;
    let mut order: Vec<usize> = (0..n).collect();

    for step in 1..=settings.steps {
        let epoch = (step - 1) / steps_per_epoch;
        let slot = ((step - 1) % steps_per_epoch) as usize;
        if slot == 0 {
            order = (0..n).collect();
            root.derive("order").derive_index(epoch).stream().shuffle(&mut order);
        }
        let lo = slot * b;
        let hi = (lo + b).min(n);
        let mols: Vec<&PreparedMolecule> = order[lo..hi].iter().map(|&i| usable[i]).collect();

        let node_seeds = mask_seeds_for(&root, "node-mask", step, mols.len());
        let edge_seeds = mask_seeds_for(&root, "edge-mask", step, mols.len());
        let mut drop_ctx = (config.dropout > 0.0).then(|| DropoutCtx {
            rate: config.dropout,
            stream: root.derive("dropout").derive_index(step).stream(),
        });

        let (mut tape, bound, out) = masked_step_forward(
            &mols,
            config,
            &params,
            &node_seeds,
            &edge_seeds,
            drop_ctx.as_mut(),
        )?;
        let scaled = tape.scale(out.total, R::from_f64(1.0 / mols.len() as f64));
        let loss = tape.value(scaled)[0].to_f64();
        if !loss.is_finite() {
            return Err(TrainError::NumericFailure { step, loss });
        }
        tape.backward(scaled).map_err(crate::model::ModelError::from)?;
        let mut grads = crate::model::collect_grads(&tape, &bound);
        drop(tape);

        clip_global_norm(&mut grads, settings.grad_clip);
        let lr = settings.lr_factor * noam_lr(step, config.hidden, settings.warmup)?;
        adam_step(&mut params, &grads, &mut adam, lr)?;

        let record = PretrainRecord {
            step,
            loss,
            node_acc: macro_accuracy(&out.node.groups),
            edge_acc: macro_accuracy(&out.edge.groups),
        };
        hook.on_step(&record, &params);
        records.push(record);
    }

    Ok(PretrainResult { params, records })
}

/// Per-group reconstruction quality on held-out mask plans.
#[derive(Debug, Clone)]
pub struct EvalGroup {
    pub name: &'static str,
    pub accuracy: f64,
    /// Accuracy of always predicting the most frequent class among the
    /// masked targets.
    pub majority_baseline: f64,
}

#[derive(Debug, Clone)]
pub struct MaskedEvalReport {
    pub node_groups: Vec<EvalGroup>,
    pub edge_groups: Vec<EvalGroup>,
    pub loss_per_molecule: f64,
}

impl MaskedEvalReport {
    pub fn node_group(&self, name: &str) -> Option<&EvalGroup> {
        self.node_groups.iter().find(|g| g.name == name)
    }
}

/// Deterministic masked-reconstruction evaluation over a corpus slice.
pub fn masked_reconstruction_eval<R: Real>(
    corpus: &[PreparedMolecule],
    params: &ParamStore<R>,
    config: &ModelConfig,
    seed: u64,
    batch_size: usize,
) -> Result<MaskedEvalReport, TrainError> {
    let usable: Vec<&PreparedMolecule> = corpus.iter().filter(|m| m.is_maskable()).collect();
    if usable.is_empty() {
        return Err(TrainError::TooFewItems { n: 0 });
    }
    let root = SplitRng::new(seed);
    let b = batch_size.max(1);

    let node_groups = node_feature_groups();
    let edge_groups = dual_feature_groups();
    let mut node_correct = alloc::vec![0usize; node_groups.len()];
    let mut node_hist: Vec<Vec<usize>> = node_groups.iter().map(|_| Vec::new()).collect();
    let mut edge_correct = alloc::vec![0usize; edge_groups.len()];
    let mut edge_hist: Vec<Vec<usize>> = edge_groups.iter().map(|_| Vec::new()).collect();
    let mut node_total = 0usize;
    let mut edge_total = 0usize;
    let mut loss_sum = 0.0;

    for (chunk_idx, chunk) in usable.chunks(b).enumerate() {
        let step = chunk_idx as u64 + 1;
        let node_seeds = mask_seeds_for(&root, "eval-node-mask", step, chunk.len());
        let edge_seeds = mask_seeds_for(&root, "eval-edge-mask", step, chunk.len());
        let (_tape, _bound, out) =
            masked_step_forward(chunk, config, params, &node_seeds, &edge_seeds, None)?;
        loss_sum += out.total_value();
        node_total += out.node.n_masked;
        edge_total += out.edge.n_masked;
        for (i, g) in out.node.groups.iter().enumerate() {
            node_correct[i] += g.correct;
        }
        for (i, g) in out.edge.groups.iter().enumerate() {
            edge_correct[i] += g.correct;
        }

        // target histograms for the majority baselines, from the same plans
        accumulate_targets(
            chunk,
            &node_seeds,
            config.mask_ratio,
            false,
            &node_groups,
            &mut node_hist,
        )?;
        accumulate_targets(
            chunk,
            &edge_seeds,
            config.mask_ratio,
            true,
            &edge_groups,
            &mut edge_hist,
        )?;
    }

    let build = |names: &[(&'static str, FeatureGroup)],
                 correct: &[usize],
                 hist: &[Vec<usize>],
                 total: usize| {
        names
            .iter()
            .zip(correct)
            .zip(hist)
            .map(|(((name, _), &c), h)| EvalGroup {
                name,
                accuracy: c as f64 / total.max(1) as f64,
                majority_baseline: h.iter().copied().max().unwrap_or(0) as f64
                    / total.max(1) as f64,
            })
            .collect::<Vec<_>>()
    };

    Ok(MaskedEvalReport {
        node_groups: build(&node_groups, &node_correct, &node_hist, node_total),
        edge_groups: build(&edge_groups, &edge_correct, &edge_hist, edge_total),
        loss_per_molecule: loss_sum / usable.len() as f64,
    })
}

fn accumulate_targets(
    chunk: &[&PreparedMolecule],
    seeds: &[u64],
    ratio: f64,
    dual: bool,
    groups: &[(&'static str, FeatureGroup)],
    hist: &mut [Vec<usize>],
) -> Result<(), TrainError> {
    let plans = sample_branch_plans(chunk, ratio, seeds, dual)?;
    for (m, plan) in chunk.iter().zip(&plans.plans) {
        let feats = if dual {
            &m.dual_graph.dual_node_features
        } else {
            &m.node_graph.node_features
        };
        for &row in &plan.masked {
            let r = feats.row(row);
            for (gi, (_, group)) in groups.iter().enumerate() {
                let class = match *group {
                    FeatureGroup::Categorical { lo, hi } => {
                        let mut best = 0;
                        for (k, &v) in r[lo..hi].iter().enumerate() {
                            if v > r[lo + best] {
                                best = k;
                            }
                        }
                        best
                    }
                    FeatureGroup::Binary { index } => usize::from(r[index] > 0.5),
                };
                if hist[gi].len() <= class {
                    hist[gi].resize(class + 1, 0);
                }
                hist[gi][class] += 1;
            }
        }
    }
    Ok(())
}
