//! Neural building blocks: sinusoidal positions, the message-passing GNN
//! layer, multi-head attention, and the composite GNN-Attention block whose
//! queries, keys, and values each come from a small GNN over the current
//! token states.

mod attention;
mod gnn;

pub use attention::{multi_head_attention, AttentionTensors};
pub use gnn::{gnn_forward, GnnStackTensors};

use alloc::vec;
use alloc::vec::Vec;

use crate::molgraph::{DualGraph, NodeGraph};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("positional encoding requires an even dimension, got {d}")]
    OddDimension { d: usize },
}

/// Graph seen by the model: tokens (nodes or directed edges), directed
/// message routes between them, raw route features, and per-token metadata.
///
/// `positions` carry each token's index in its original (pre-masking)
/// graph; `graph_of` assigns tokens to graphs inside a block-diagonal
/// batch.
#[derive(Debug, Clone)]
pub struct TokenGraph {
    pub n_tokens: usize,
    pub token_features: Vec<f32>,
    pub f_token: usize,
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    pub edge_features: Vec<f32>,
    pub f_edge: usize,
    pub positions: Vec<usize>,
    pub graph_of: Vec<usize>,
}

impl TokenGraph {
    pub fn from_node_graph(g: &NodeGraph) -> Self {
        TokenGraph {
            n_tokens: g.n_nodes,
            token_features: g.node_features.data.clone(),
            f_token: g.node_features.cols,
            edge_src: g.directed_edges.iter().map(|&(u, _)| u).collect(),
            edge_dst: g.directed_edges.iter().map(|&(_, v)| v).collect(),
            edge_features: g.edge_features.data.clone(),
            f_edge: g.edge_features.cols,
            positions: (0..g.n_nodes).collect(),
            graph_of: vec![0; g.n_nodes],
        }
    }

    pub fn from_dual_graph(dg: &DualGraph) -> Self {
        TokenGraph {
            n_tokens: dg.n_dual_nodes,
            token_features: dg.dual_node_features.data.clone(),
            f_token: dg.dual_node_features.cols,
            edge_src: dg.dual_edges.iter().map(|&(s, _)| s).collect(),
            edge_dst: dg.dual_edges.iter().map(|&(_, t)| t).collect(),
            edge_features: dg.dual_edge_features.data.clone(),
            f_edge: dg.dual_edge_features.cols,
            positions: (0..dg.n_dual_nodes).collect(),
            graph_of: vec![0; dg.n_dual_nodes],
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edge_src.len()
    }

    /// Token features as a tape constant.
    pub fn features_tensor<R: Real>(&self, tape: &mut Tape<R>) -> Tensor {
        let data = self
            .token_features
            .iter()
            .map(|&x| R::from_f64(f64::from(x)))
            .collect();
        tape.constant(&[self.n_tokens, self.f_token], data)
    }

    /// Edge features as a tape constant.
    pub fn edge_features_tensor<R: Real>(&self, tape: &mut Tape<R>) -> Tensor {
        let data = self
            .edge_features
            .iter()
            .map(|&x| R::from_f64(f64::from(x)))
            .collect();
        tape.constant(&[self.n_edges(), self.f_edge], data)
    }

    /// Additive attention mask: 0 within a graph, -inf across graphs.
    pub fn attention_mask<R: Real>(&self, tape: &mut Tape<R>) -> Tensor {
        let n = self.n_tokens;
        let neg_inf = R::from_f64(f64::NEG_INFINITY);
        let mut data = vec![R::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                if self.graph_of[i] != self.graph_of[j] {
                    data[i * n + j] = neg_inf;
                }
            }
        }
        tape.constant(&[n, n], data)
    }
}

/// Sinusoidal positional encoding rows: row for position `p` holds
/// `sin(p / 10000^(2i/d))` at slot `2i` and the matching cosine at `2i+1`.
/// Computed in f64 regardless of tape precision.
pub fn positional_encoding(positions: &[usize], d: usize) -> Result<Vec<f64>, NnError> {
    if d % 2 != 0 {
        return Err(NnError::OddDimension { d });
    }
    let mut rows = Vec::with_capacity(positions.len() * d);
    for &p in positions {
        for i in 0..d / 2 {
            let denom = libm::pow(10000.0, 2.0 * i as f64 / d as f64);
            let angle = p as f64 / denom;
            rows.push(libm::sin(angle));
            rows.push(libm::cos(angle));
        }
    }
    Ok(rows)
}

/// Positional encoding as a tape constant for the given token positions.
pub fn positional_encoding_tensor<R: Real>(
    tape: &mut Tape<R>,
    positions: &[usize],
    d: usize,
) -> Result<Tensor, NnError> {
    let rows = positional_encoding(positions, d)?;
    let data = rows.into_iter().map(R::from_f64).collect();
    Ok(tape.constant(&[positions.len(), d], data))
}

/// Parameters of one GNN-Attention block, bound to a tape.
pub struct BlockTensors {
    pub gq: GnnStackTensors,
    pub gk: GnnStackTensors,
    pub gv: GnnStackTensors,
    pub attn: AttentionTensors,
    pub ffn_w1: Tensor,
    pub ffn_b1: Tensor,
    pub ffn_w2: Tensor,
    pub ffn_b2: Tensor,
    pub ln1_gamma: Tensor,
    pub ln1_beta: Tensor,
    pub ln2_gamma: Tensor,
    pub ln2_beta: Tensor,
}

/// One encoder/decoder layer: Q, K, V from three GNN stacks over the same
/// graph, multi-head attention, then feed-forward and layer norm with
/// block-local residuals.
pub fn gnn_attention_block<R: Real>(
    tape: &mut Tape<R>,
    h: Tensor,
    graph: &TokenGraph,
    mask: Tensor,
    block: &BlockTensors,
) -> Result<Tensor, TensorError> {
    let q = gnn_forward(tape, h, graph, &block.gq)?;
    let k = gnn_forward(tape, h, graph, &block.gk)?;
    let v = gnn_forward(tape, h, graph, &block.gv)?;
    let attn_out = multi_head_attention(tape, q, k, v, mask, &block.attn)?;

    let res1 = tape.add(h, attn_out)?;
    let x = tape.layer_norm(res1, block.ln1_gamma, block.ln1_beta)?;

    let ff1 = tape.matmul(x, block.ffn_w1)?;
    let ff1 = tape.add(ff1, block.ffn_b1)?;
    let ff1 = tape.relu(ff1);
    let ff2 = tape.matmul(ff1, block.ffn_w2)?;
    let ff2 = tape.add(ff2, block.ffn_b2)?;

    let res2 = tape.add(x, ff2)?;
    tape.layer_norm(res2, block.ln2_gamma, block.ln2_beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bind, block_tensors, init_pretrain_params, ModelConfig};
    use alloc::collections::BTreeSet;
    use alloc::vec::Vec;

    #[test]
    fn zeroed_output_projection_reduces_block_to_feedforward_path() {
        let config = ModelConfig::tiny(8);
        let mut store = init_pretrain_params::<f64>(&config, 3);
        for v in store.get_mut("node.enc0.attn.wo").unwrap().data.iter_mut() {
            *v = 0.0;
        }

        let graph = TokenGraph {
            n_tokens: 3,
            token_features: alloc::vec![0.0; 3],
            f_token: 1,
            edge_src: alloc::vec![0, 1],
            edge_dst: alloc::vec![1, 0],
            edge_features: alloc::vec![1.0; 2 * config.f_edge],
            f_edge: config.f_edge,
            positions: alloc::vec![0, 1, 2],
            graph_of: alloc::vec![0; 3],
        };
        let mut tape: Tape<f64> = Tape::new();
        let bound = bind(&mut tape, &store);
        let block = block_tensors(&bound, "node.enc0", &config);
        let mask = graph.attention_mask(&mut tape);
        let hdata: Vec<f64> = (0..3 * config.hidden).map(|i| (i as f64) * 0.01 - 0.1).collect();
        let h = tape.constant(&[3, config.hidden], hdata);
        let out = gnn_attention_block(&mut tape, h, &graph, mask, &block).unwrap();

        // with W_o = 0 the block is layer norm + feed-forward of the
        // residual alone
        let x = tape.layer_norm(h, block.ln1_gamma, block.ln1_beta).unwrap();
        let f1 = tape.matmul(x, block.ffn_w1).unwrap();
        let f1 = tape.add(f1, block.ffn_b1).unwrap();
        let f1 = tape.relu(f1);
        let f2 = tape.matmul(f1, block.ffn_w2).unwrap();
        let f2 = tape.add(f2, block.ffn_b2).unwrap();
        let res = tape.add(x, f2).unwrap();
        let expect = tape.layer_norm(res, block.ln2_gamma, block.ln2_beta).unwrap();
        assert_eq!(tape.value(out), tape.value(expect));
    }

    #[test]
    fn single_token_graph_block_is_well_defined() {
        let config = ModelConfig::tiny(8);
        let store = init_pretrain_params::<f64>(&config, 4);
        let graph = TokenGraph {
            n_tokens: 1,
            token_features: alloc::vec![1.0],
            f_token: 1,
            edge_src: Vec::new(),
            edge_dst: Vec::new(),
            edge_features: Vec::new(),
            f_edge: config.f_edge,
            positions: alloc::vec![0],
            graph_of: alloc::vec![0],
        };
        let mut tape: Tape<f64> = Tape::new();
        let bound = bind(&mut tape, &store);
        let block = block_tensors(&bound, "node.enc0", &config);
        let mask = graph.attention_mask(&mut tape);
        let h = tape.constant(&[1, config.hidden], alloc::vec![0.25; config.hidden]);
        let out = gnn_attention_block(&mut tape, h, &graph, mask, &block).unwrap();
        assert_eq!(tape.shape(out), &[1, config.hidden]);
        assert!(tape.value(out).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn positional_row_zero() {
        let rows = positional_encoding(&[0], 6).unwrap();
        assert_eq!(rows, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn positional_row_one_d4() {
        let rows = positional_encoding(&[1], 4).unwrap();
        let expect = [
            libm::sin(1.0),
            libm::cos(1.0),
            libm::sin(0.01),
            libm::cos(0.01),
        ];
        for (got, want) in rows.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn positional_rows_distinct_on_grid() {
        let d = 16;
        let positions: Vec<usize> = (0..10000).step_by(37).collect();
        let rows = positional_encoding(&positions, d).unwrap();
        let mut seen = BTreeSet::new();
        for chunk in rows.chunks(d) {
            let bits: Vec<u64> = chunk.iter().map(|x| x.to_bits()).collect();
            assert!(seen.insert(bits), "duplicate positional row");
        }
    }

    #[test]
    fn odd_dimension_rejected() {
        assert_eq!(
            positional_encoding(&[0], 5),
            Err(NnError::OddDimension { d: 5 })
        );
    }
}
