//! Scaled dot-product attention with per-head projections, a graph
//! membership mask, and an output projection.

use alloc::vec::Vec;

use crate::real::Real;
use crate::tensor::{Tape, Tensor, TensorError};

/// Multi-head projection weights bound to a tape. Each head holds
/// `(W_q, W_k, W_v)` of shape `d x d_k` with `d_k = d / heads`.
pub struct AttentionTensors {
    pub heads: Vec<(Tensor, Tensor, Tensor)>,
    /// Output projection `d x d`.
    pub wo: Tensor,
}

/// Per head: `softmax(Q W_q (K W_k)^T / sqrt(d_k) + mask) V W_v`; heads are
/// concatenated and projected by `W_o`. The additive mask is `-inf` for
/// token pairs that may not attend (different graphs in a batch).
pub fn multi_head_attention<R: Real>(
    tape: &mut Tape<R>,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: Tensor,
    params: &AttentionTensors,
) -> Result<Tensor, TensorError> {
    let mut head_outputs = Vec::with_capacity(params.heads.len());
    for &(wq, wk, wv) in &params.heads {
        let d_k = tape.shape(wq)[1];
        let qi = tape.matmul(q, wq)?;
        let ki = tape.matmul(k, wk)?;
        let vi = tape.matmul(v, wv)?;
        let kt = tape.transpose(ki)?;
        let scores = tape.matmul(qi, kt)?;
        let scaled = tape.scale(scores, R::from_f64(1.0 / libm::sqrt(d_k as f64)));
        let masked = tape.add(scaled, mask)?;
        let probs = tape.softmax_rows(masked)?;
        head_outputs.push(tape.matmul(probs, vi)?);
    }
    let cat = tape.concat(1, &head_outputs)?;
    tape.matmul(cat, params.wo)
}
