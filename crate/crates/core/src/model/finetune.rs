//! Fine-tuning forward pass: full-graph encoding of both branches, per-atom
//! aggregation, the shared self-attentive readout, per-branch prediction
//! heads, and prediction averaging.

use alloc::vec::Vec;

use super::branch::{branch_tail, encode_tokens, Branch, DropoutCtx};
use super::config::ModelConfig;
use super::params::Bound;
use super::ModelError;
use crate::molgraph::{DescriptorVector, DualGraph, NodeGraph, N_DESCRIPTORS};
use crate::nn::TokenGraph;
use crate::real::Real;
use crate::tensor::{Tape, Tensor};

/// Full (unmasked) graphs of a batch, plus the routing needed to aggregate
/// edge-branch token states into per-atom vectors.
pub struct FinetuneGraphInputs {
    pub node_graph: TokenGraph,
    pub dual_graph: TokenGraph,
    /// For each dual token (directed edge u -> v), the packed index of its
    /// destination atom v.
    pub dual_token_atom: Vec<usize>,
    pub n_graphs: usize,
    /// Molecule-level descriptor rows (`n_graphs x 24`), concatenated to the
    /// graph embedding before the prediction heads when present.
    pub descriptors: Option<Vec<f64>>,
}

impl FinetuneGraphInputs {
    pub fn single(g: &NodeGraph, dg: &DualGraph, desc: Option<&DescriptorVector>) -> Self {
        FinetuneGraphInputs {
            node_graph: TokenGraph::from_node_graph(g),
            dual_graph: TokenGraph::from_dual_graph(dg),
            dual_token_atom: g.directed_edges.iter().map(|&(_, v)| v).collect(),
            n_graphs: 1,
            descriptors: desc.map(|d| d.as_slice().to_vec()),
        }
    }
}

pub struct FinetunePreds {
    pub node_logits: Tensor,
    pub edge_logits: Tensor,
    /// Post-sigmoid per-branch predictions, `n_graphs x n_tasks`.
    pub p_node: Tensor,
    pub p_edge: Tensor,
    /// Mean of the two branch predictions.
    pub p_final: Tensor,
}

pub fn finetune_forward<R: Real>(
    tape: &mut Tape<R>,
    inputs: &FinetuneGraphInputs,
    bound: &Bound<'_, R>,
    config: &ModelConfig,
    mut dropout: Option<&mut DropoutCtx>,
) -> Result<FinetunePreds, ModelError> {
    let n_atoms = inputs.node_graph.n_tokens;

    let (h0_node, tok_node) = encode_tokens(
        tape,
        &inputs.node_graph,
        bound,
        Branch::Node,
        config,
        &mut dropout,
    )?;
    let (h0_dual, tok_dual) = encode_tokens(
        tape,
        &inputs.dual_graph,
        bound,
        Branch::Edge,
        config,
        &mut dropout,
    )?;

    // node branch: sum incoming neighbor states per atom
    let gathered = tape.gather_rows(tok_node, &inputs.node_graph.edge_src)?;
    let m_node = tape.scatter_add_rows(gathered, &inputs.node_graph.edge_dst, n_atoms)?;
    let h_node = branch_tail(tape, bound, Branch::Node, m_node, h0_node)?;

    // edge branch: sum incoming directed-edge states per atom; the
    // long-range residual aggregates the initial dual features the same way
    let m_edge = tape.scatter_add_rows(tok_dual, &inputs.dual_token_atom, n_atoms)?;
    let r_edge = tape.scatter_add_rows(h0_dual, &inputs.dual_token_atom, n_atoms)?;
    let h_edge = branch_tail(tape, bound, Branch::Edge, m_edge, r_edge)?;

    let node_logits = branch_prediction(tape, inputs, bound, config, h_node, "node")?;
    let edge_logits = branch_prediction(tape, inputs, bound, config, h_edge, "edge")?;

    let p_node = tape.sigmoid(node_logits);
    let p_edge = tape.sigmoid(edge_logits);
    let sum = tape.add(p_node, p_edge)?;
    let p_final = tape.scale(sum, R::from_f64(0.5));

    Ok(FinetunePreds {
        node_logits,
        edge_logits,
        p_node,
        p_edge,
        p_final,
    })
}

/// Self-attentive pooling of one graph's atom embeddings:
/// `S = softmax(W2 tanh(W1 H^T))`, `g = Flatten(S H)`. Each attention row
/// of `S` sums to 1 over the graph's atoms, so `g` treats the rows of `H`
/// as a set: reordering them leaves the result unchanged.
pub fn self_attentive_readout<R: Real>(
    tape: &mut Tape<R>,
    h_atoms: Tensor,
    w1: Tensor,
    w2: Tensor,
) -> Result<Tensor, ModelError> {
    let attn_out = tape.shape(w2)[0];
    let d = tape.shape(h_atoms)[1];
    let ht = tape.transpose(h_atoms)?;
    let a = tape.matmul(w1, ht)?;
    let a = tape.tanh(a);
    let scores = tape.matmul(w2, a)?;
    let s = tape.softmax_rows(scores)?;
    let pooled = tape.matmul(s, h_atoms)?;
    Ok(tape.reshape(pooled, &[1, attn_out * d])?)
}

/// Shared self-attentive readout and one branch's prediction head.
fn branch_prediction<R: Real>(
    tape: &mut Tape<R>,
    inputs: &FinetuneGraphInputs,
    bound: &Bound<'_, R>,
    config: &ModelConfig,
    h_atoms: Tensor,
    br: &str,
) -> Result<Tensor, ModelError> {
    let w1 = bound.t("readout.w1");
    let w2 = bound.t("readout.w2");

    let mut graph_rows = Vec::with_capacity(inputs.n_graphs);
    for g in 0..inputs.n_graphs {
        let idx: Vec<usize> = inputs
            .node_graph
            .graph_of
            .iter()
            .enumerate()
            .filter_map(|(i, &gi)| (gi == g).then_some(i))
            .collect();
        let hg = tape.gather_rows(h_atoms, &idx)?;
        let mut row = self_attentive_readout(tape, hg, w1, w2)?;
        if let Some(desc) = &inputs.descriptors {
            let dslice = &desc[g * N_DESCRIPTORS..(g + 1) * N_DESCRIPTORS];
            let dconst = tape.constant(
                &[1, N_DESCRIPTORS],
                dslice.iter().map(|&x| R::from_f64(x)).collect::<Vec<_>>(),
            );
            row = tape.concat(1, &[row, dconst])?;
        }
        graph_rows.push(row);
    }
    let gmat = tape.concat(0, &graph_rows)?;

    let h1 = tape.matmul(gmat, bound.t(&alloc::format!("{br}.head.w1")))?;
    let h1 = tape.add(h1, bound.t(&alloc::format!("{br}.head.b1")))?;
    let h1 = tape.relu(h1);
    let logits = tape.matmul(h1, bound.t(&alloc::format!("{br}.head.w2")))?;
    let logits = tape.add(logits, bound.t(&alloc::format!("{br}.head.b2")))?;
    Ok(logits)
}

/// Zero atoms per graph never occur (a parsed molecule has at least one
/// atom), so every readout row is well-defined.
#[allow(dead_code)]
fn _invariant_note() {}
