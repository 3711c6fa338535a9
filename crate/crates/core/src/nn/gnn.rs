//! Message-passing layer. One stack runs K rounds over the same graph:
//!
//! ```text
//! m_v = sum over incoming edges (u -> v) of relu(W_m [h_u ; e_uv W_e] + b_m)
//! h_v = relu(W_k m_v + b_k) + h_v
//! ```
//!
//! The edge projection and message weights are shared across the K rounds;
//! the update weights W_k, b_k are per round. Raw edge features enter every
//! round through the message concatenation. Isolated nodes receive
//! `relu(b_k)` plus their own state through the self residual.

use alloc::vec::Vec;

use super::TokenGraph;
use crate::real::Real;
use crate::tensor::{Tape, Tensor, TensorError};

/// One GNN stack bound to a tape.
pub struct GnnStackTensors {
    /// Raw edge features to hidden size: `f_edge x d`.
    pub edge_proj: Tensor,
    /// Message transform over `[h_u ; e_proj]`: `2d x d`.
    pub msg_w: Tensor,
    /// Message bias: `d`.
    pub msg_b: Tensor,
    /// Per-round update weight `d x d` and bias `d`.
    pub steps: Vec<(Tensor, Tensor)>,
}

pub fn gnn_forward<R: Real>(
    tape: &mut Tape<R>,
    h: Tensor,
    graph: &TokenGraph,
    stack: &GnnStackTensors,
) -> Result<Tensor, TensorError> {
    let n = graph.n_tokens;
    let edge_feats = graph.edge_features_tensor(tape);
    let e_proj = tape.matmul(edge_feats, stack.edge_proj)?;

    let mut state = h;
    for &(w, b) in &stack.steps {
        let gathered = tape.gather_rows(state, &graph.edge_src)?;
        let cat = tape.concat(1, &[gathered, e_proj])?;
        let msg_lin = tape.matmul(cat, stack.msg_w)?;
        let msg_lin = tape.add(msg_lin, stack.msg_b)?;
        let msg = tape.relu(msg_lin);
        let agg = tape.scatter_add_rows(msg, &graph.edge_dst, n)?;
        let upd = tape.matmul(agg, w)?;
        let upd = tape.add(upd, b)?;
        let upd = tape.relu(upd);
        state = tape.add(upd, state)?;
    }
    Ok(state)
}
