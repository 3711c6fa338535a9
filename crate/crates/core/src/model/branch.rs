//! Per-branch encoder and decoder assembly.
//!
//! The encoder projects raw features to the hidden size, adds sinusoidal
//! positions for the tokens' original indices, runs N GNN-Attention
//! blocks, aggregates each token's incoming neighbor states, concatenates
//! the projected initial features as a long-range residual, and finishes
//! with a feed-forward and layer norm. The decoder runs M blocks over the
//! full original topology and projects to the reconstruction targets.

use alloc::format;

use super::config::ModelConfig;
use super::params::{block_tensors, Bound};
use super::ModelError;
use crate::nn::{gnn_attention_block, positional_encoding_tensor, TokenGraph};
use crate::real::Real;
use crate::rng::Stream;
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Node,
    Edge,
}

impl Branch {
    pub fn prefix(self) -> &'static str {
        match self {
            Branch::Node => "node",
            Branch::Edge => "edge",
        }
    }

    /// Reconstruction target width for this branch.
    pub fn recon_dim(self, config: &ModelConfig) -> usize {
        match self {
            Branch::Node => config.f_node,
            Branch::Edge => config.f_dual,
        }
    }
}

/// Dropout state for one training pass. Disabled at rate 0.
pub struct DropoutCtx {
    pub rate: f64,
    pub stream: Stream,
}

fn apply_dropout<R: Real>(
    tape: &mut Tape<R>,
    x: Tensor,
    ctx: &mut Option<&mut DropoutCtx>,
) -> Result<Tensor, ModelError> {
    let Some(ctx) = ctx.as_deref_mut() else {
        return Ok(x);
    };
    if ctx.rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - ctx.rate;
    let shape = tape.shape(x).to_vec();
    let data: alloc::vec::Vec<R> = (0..tape.value(x).len())
        .map(|_| {
            if ctx.stream.next_f64() < keep {
                R::from_f64(1.0 / keep)
            } else {
                R::ZERO
            }
        })
        .collect();
    let mask = tape.constant(&shape, data);
    Ok(tape.mul(x, mask)?)
}

/// Stages shared by pre-training and fine-tuning: input projection with
/// positions, then the stack of encoder blocks.
/// Returns (projected inputs with positions, token states after N blocks).
pub(crate) fn encode_tokens<R: Real>(
    tape: &mut Tape<R>,
    graph: &TokenGraph,
    bound: &Bound<'_, R>,
    branch: Branch,
    config: &ModelConfig,
    dropout: &mut Option<&mut DropoutCtx>,
) -> Result<(Tensor, Tensor), ModelError> {
    let br = branch.prefix();
    let x = graph.features_tensor(tape);
    let proj = tape.matmul(x, bound.t(&format!("{br}.in_proj.w")))?;
    let proj = tape.add(proj, bound.t(&format!("{br}.in_proj.b")))?;
    let pos = positional_encoding_tensor(tape, &graph.positions, config.hidden)?;
    let h0 = tape.add(proj, pos)?;

    let mask = graph.attention_mask(tape);
    let mut h = h0;
    for i in 0..config.encoder_blocks {
        let block = block_tensors(bound, &format!("{br}.enc{i}"), config);
        h = gnn_attention_block(tape, h, graph, mask, &block)?;
        h = apply_dropout(tape, h, dropout)?;
    }
    Ok((h0, h))
}

/// Final per-token embeddings of one branch over one (possibly visible,
/// possibly packed) graph.
pub struct BranchOutput {
    /// Token states after the N encoder blocks.
    pub tokens: Tensor,
    /// Incoming-neighbor aggregation of those states.
    pub aggregated: Tensor,
    /// After the long-range residual, feed-forward, and layer norm.
    pub final_tokens: Tensor,
}

pub fn encode_branch<R: Real>(
    tape: &mut Tape<R>,
    graph: &TokenGraph,
    bound: &Bound<'_, R>,
    branch: Branch,
    config: &ModelConfig,
    mut dropout: Option<&mut DropoutCtx>,
) -> Result<BranchOutput, ModelError> {
    let (h0, tokens) = encode_tokens(tape, graph, bound, branch, config, &mut dropout)?;

    // m_v = sum of incoming neighbor states along the graph's own routes
    let gathered = tape.gather_rows(tokens, &graph.edge_src)?;
    let aggregated = tape.scatter_add_rows(gathered, &graph.edge_dst, graph.n_tokens)?;

    let final_tokens = branch_tail(tape, bound, branch, aggregated, h0)?;
    Ok(BranchOutput {
        tokens,
        aggregated,
        final_tokens,
    })
}

/// Long-range residual concatenation followed by the encoder tail
/// (feed-forward + layer norm). `residual` must have the same row count as
/// `aggregated`.
pub(crate) fn branch_tail<R: Real>(
    tape: &mut Tape<R>,
    bound: &Bound<'_, R>,
    branch: Branch,
    aggregated: Tensor,
    residual: Tensor,
) -> Result<Tensor, ModelError> {
    let br = branch.prefix();
    let cat = tape.concat(1, &[aggregated, residual])?;
    let t1 = tape.matmul(cat, bound.t(&format!("{br}.tail.w1")))?;
    let t1 = tape.add(t1, bound.t(&format!("{br}.tail.b1")))?;
    let t1 = tape.relu(t1);
    let t2 = tape.matmul(t1, bound.t(&format!("{br}.tail.w2")))?;
    let t2 = tape.add(t2, bound.t(&format!("{br}.tail.b2")))?;
    let out = tape.layer_norm(
        t2,
        bound.t(&format!("{br}.tail.ln.g")),
        bound.t(&format!("{br}.tail.ln.b")),
    )?;
    Ok(out)
}

/// Decode reordered full-graph tokens (visible embeddings and mask tokens)
/// over the full original topology; returns reconstruction logits.
pub fn decode_branch<R: Real>(
    tape: &mut Tape<R>,
    full_tokens: Tensor,
    full_graph: &TokenGraph,
    bound: &Bound<'_, R>,
    branch: Branch,
    config: &ModelConfig,
    mut dropout: Option<&mut DropoutCtx>,
) -> Result<Tensor, ModelError> {
    let br = branch.prefix();
    let mask = full_graph.attention_mask(tape);
    let mut h = full_tokens;
    for i in 0..config.decoder_blocks {
        let block = block_tensors(bound, &format!("{br}.dec{i}"), config);
        h = gnn_attention_block(tape, h, full_graph, mask, &block)?;
        h = apply_dropout(tape, h, &mut dropout)?;
    }
    let logits = tape.matmul(h, bound.t(&format!("{br}.recon.w")))?;
    let logits = tape.add(logits, bound.t(&format!("{br}.recon.b")))?;
    Ok(logits)
}
