//! Seeded masking of nodes and directed edges, visible-subgraph
//! extraction, and the feature reordering that places encoder outputs and
//! mask tokens back into full-graph order for the decoder.
//!
//! Node and directed-edge masks are sampled independently; masking the
//! directed edge (u, v) never implies masking (v, u).

use alloc::vec::Vec;

use crate::molgraph::{DualGraph, FeatMatrix, NodeGraph};
use crate::nn::positional_encoding_tensor;
use crate::real::Real;
use crate::rng::SplitRng;
use crate::tensor::{Tape, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaskError {
    #[error("cannot mask a set of {n} items (need at least 2)")]
    TooFewItems { n: usize },
    #[error("mask ratio {ratio} outside (0, 1)")]
    RatioOutOfRange { ratio: f64 },
    #[error("plan covers {expected} items, got {got}")]
    PlanMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Seeded partition of item indices into masked and visible sets.
///
/// The masked count is `clamp(floor(ratio * n), 1, n - 1)`, so the encoder
/// always sees at least one item and the loss always has at least one
/// target. Identical `(n_items, ratio, seed)` produce identical plans.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub n_items: usize,
    pub ratio: f64,
    pub masked: Vec<usize>,
    pub visible: Vec<usize>,
    pub seed: u64,
}

impl MaskPlan {
    pub fn n_masked(&self) -> usize {
        self.masked.len()
    }

    pub fn n_visible(&self) -> usize {
        self.visible.len()
    }

    pub fn is_masked(&self, index: usize) -> bool {
        self.masked.binary_search(&index).is_ok()
    }
}

pub fn sample_mask_plan(n_items: usize, ratio: f64, seed: u64) -> Result<MaskPlan, MaskError> {
    if n_items < 2 {
        return Err(MaskError::TooFewItems { n: n_items });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(MaskError::RatioOutOfRange { ratio });
    }
    let count = (libm::floor(ratio * n_items as f64) as usize).clamp(1, n_items - 1);
    let mut stream = SplitRng::new(seed).stream();
    let mut masked = stream.sample_indices(n_items, count);
    masked.sort_unstable();
    let mut visible = Vec::with_capacity(n_items - count);
    let mut cursor = 0;
    for i in 0..n_items {
        if cursor < masked.len() && masked[cursor] == i {
            cursor += 1;
        } else {
            visible.push(i);
        }
    }
    Ok(MaskPlan {
        n_items,
        ratio,
        masked,
        visible,
        seed,
    })
}

fn select_rows(src: &FeatMatrix, keep: &[usize]) -> FeatMatrix {
    let mut out = FeatMatrix::zeros(keep.len(), src.cols);
    for (new, &old) in keep.iter().enumerate() {
        out.row_mut(new).copy_from_slice(src.row(old));
    }
    out
}

/// Induced subgraph on the visible nodes: masked nodes and every directed
/// edge incident to one are removed. Returns the subgraph and, per
/// surviving node, its original index.
pub fn extract_visible_node_graph(
    g: &NodeGraph,
    plan: &MaskPlan,
) -> Result<(NodeGraph, Vec<usize>), MaskError> {
    if plan.n_items != g.n_nodes {
        return Err(MaskError::PlanMismatch {
            expected: g.n_nodes,
            got: plan.n_items,
        });
    }
    let mut new_index = alloc::vec![usize::MAX; g.n_nodes];
    for (new, &old) in plan.visible.iter().enumerate() {
        new_index[old] = new;
    }

    let mut directed_edges = Vec::new();
    let mut keep_edges = Vec::new();
    for (e, &(u, v)) in g.directed_edges.iter().enumerate() {
        if new_index[u] != usize::MAX && new_index[v] != usize::MAX {
            directed_edges.push((new_index[u], new_index[v]));
            keep_edges.push(e);
        }
    }

    let mut neighbors_in: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new(); plan.visible.len()];
    for (new_e, &(u, v)) in directed_edges.iter().enumerate() {
        neighbors_in[v].push((u, new_e));
    }

    let sub = NodeGraph {
        n_nodes: plan.visible.len(),
        node_features: select_rows(&g.node_features, &plan.visible),
        edge_features: select_rows(&g.edge_features, &keep_edges),
        directed_edges,
        neighbors_in,
    };
    Ok((sub, plan.visible.clone()))
}

/// Induced subgraph of the dual graph on the visible directed edges.
pub fn extract_visible_dual_graph(
    dg: &DualGraph,
    plan: &MaskPlan,
) -> Result<(DualGraph, Vec<usize>), MaskError> {
    if plan.n_items != dg.n_dual_nodes {
        return Err(MaskError::PlanMismatch {
            expected: dg.n_dual_nodes,
            got: plan.n_items,
        });
    }
    let mut new_index = alloc::vec![usize::MAX; dg.n_dual_nodes];
    for (new, &old) in plan.visible.iter().enumerate() {
        new_index[old] = new;
    }

    let mut dual_edges = Vec::new();
    let mut keep_edges = Vec::new();
    for (e, &(s, t)) in dg.dual_edges.iter().enumerate() {
        if new_index[s] != usize::MAX && new_index[t] != usize::MAX {
            dual_edges.push((new_index[s], new_index[t]));
            keep_edges.push(e);
        }
    }

    let sub = DualGraph {
        n_dual_nodes: plan.visible.len(),
        dual_node_features: select_rows(&dg.dual_node_features, &plan.visible),
        dual_edges,
        dual_edge_features: select_rows(&dg.dual_edge_features, &keep_edges),
    };
    Ok((sub, plan.visible.clone()))
}

/// Scatter visible-token encoder outputs back to their original positions
/// and fill masked positions with the (learned) mask token. No positional
/// term; packed batches add their own positions.
///
/// `visible[i]` is the original position of encoder output row `i`.
pub fn scatter_with_tokens<R: Real>(
    tape: &mut Tape<R>,
    encoder_out: Tensor,
    visible: &[usize],
    n_full: usize,
    mask_token: Tensor,
) -> Result<Tensor, MaskError> {
    let n_vis = tape.shape(encoder_out)[0];
    if n_vis != visible.len() {
        return Err(MaskError::PlanMismatch {
            expected: visible.len(),
            got: n_vis,
        });
    }
    // source row per full position: its visible rank, or the token row
    let mut map = alloc::vec![n_vis; n_full];
    for (rank, &orig) in visible.iter().enumerate() {
        if orig >= n_full {
            return Err(MaskError::PlanMismatch {
                expected: n_full,
                got: orig + 1,
            });
        }
        map[orig] = rank;
    }
    let stacked = tape.concat(0, &[encoder_out, mask_token])?;
    Ok(tape.gather_rows(stacked, &map)?)
}

/// Full feature reordering for a single plan: visible encoder rows and mask
/// tokens placed in original order, plus sinusoidal positions for every
/// row.
pub fn reorder_with_mask_tokens<R: Real>(
    tape: &mut Tape<R>,
    encoder_out: Tensor,
    plan: &MaskPlan,
    mask_token: Tensor,
    d: usize,
) -> Result<Tensor, MaskError> {
    let placed = scatter_with_tokens(tape, encoder_out, &plan.visible, plan.n_items, mask_token)?;
    let positions: Vec<usize> = (0..plan.n_items).collect();
    let pos = positional_encoding_tensor(tape, &positions, d).expect("hidden size must be even");
    Ok(tape.add(placed, pos)?)
}
