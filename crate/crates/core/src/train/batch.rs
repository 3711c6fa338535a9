//! Block-diagonal packing of several molecules into one token graph per
//! branch. Token positions stay molecule-local (the decoder's reordering
//! depends on original indices), and `graph_of` drives the attention mask
//! so tokens of different molecules can never attend to each other.

use alloc::vec::Vec;

use super::TrainError;
use crate::masking::{
    extract_visible_dual_graph, extract_visible_node_graph, sample_mask_plan, MaskPlan,
};
use crate::model::FinetuneGraphInputs;
use crate::molgraph::{
    build_dual_graph, build_node_graph, compute_descriptors, DescriptorVector, DualGraph,
    FeaturizeError, Molecule, NodeGraph, N_DESCRIPTORS,
};
use crate::nn::TokenGraph;

/// A molecule with everything the model consumes precomputed.
#[derive(Debug, Clone)]
pub struct PreparedMolecule {
    pub molecule: Molecule,
    pub node_graph: NodeGraph,
    pub dual_graph: DualGraph,
    pub descriptors: DescriptorVector,
}

impl PreparedMolecule {
    pub fn new(molecule: Molecule) -> Result<Self, FeaturizeError> {
        let node_graph = build_node_graph(&molecule)?;
        let dual_graph = build_dual_graph(&node_graph);
        let descriptors = compute_descriptors(&molecule);
        Ok(PreparedMolecule {
            molecule,
            node_graph,
            dual_graph,
            descriptors,
        })
    }

    /// Pre-training needs at least two atoms (node masking) and one bond
    /// (two directed edges for the edge branch).
    pub fn is_maskable(&self) -> bool {
        self.node_graph.n_nodes >= 2 && self.dual_graph.n_dual_nodes >= 2
    }
}

fn empty_token_graph(f_token: usize, f_edge: usize) -> TokenGraph {
    TokenGraph {
        n_tokens: 0,
        token_features: Vec::new(),
        f_token,
        edge_src: Vec::new(),
        edge_dst: Vec::new(),
        edge_features: Vec::new(),
        f_edge,
        positions: Vec::new(),
        graph_of: Vec::new(),
    }
}

fn append_graph(packed: &mut TokenGraph, part: &TokenGraph, graph_id: usize) {
    let offset = packed.n_tokens;
    packed.n_tokens += part.n_tokens;
    packed.token_features.extend_from_slice(&part.token_features);
    packed
        .edge_src
        .extend(part.edge_src.iter().map(|&s| s + offset));
    packed
        .edge_dst
        .extend(part.edge_dst.iter().map(|&t| t + offset));
    packed.edge_features.extend_from_slice(&part.edge_features);
    packed.positions.extend_from_slice(&part.positions);
    packed
        .graph_of
        .extend(core::iter::repeat(graph_id).take(part.n_tokens));
}

/// One branch of a packed batch.
pub struct PackedBranch {
    pub graph: TokenGraph,
    /// Token offset of each molecule within the packed graph.
    pub offsets: Vec<usize>,
}

pub fn pack_node_graphs(mols: &[&PreparedMolecule]) -> PackedBranch {
    let mut graph = empty_token_graph(
        mols.first().map_or(0, |m| m.node_graph.node_features.cols),
        mols.first().map_or(0, |m| m.node_graph.edge_features.cols),
    );
    let mut offsets = Vec::with_capacity(mols.len());
    for (i, m) in mols.iter().enumerate() {
        offsets.push(graph.n_tokens);
        append_graph(&mut graph, &TokenGraph::from_node_graph(&m.node_graph), i);
    }
    PackedBranch { graph, offsets }
}

pub fn pack_dual_graphs(mols: &[&PreparedMolecule]) -> PackedBranch {
    let mut graph = empty_token_graph(
        mols.first().map_or(0, |m| m.dual_graph.dual_node_features.cols),
        mols.first().map_or(0, |m| m.dual_graph.dual_edge_features.cols),
    );
    let mut offsets = Vec::with_capacity(mols.len());
    for (i, m) in mols.iter().enumerate() {
        offsets.push(graph.n_tokens);
        append_graph(&mut graph, &TokenGraph::from_dual_graph(&m.dual_graph), i);
    }
    PackedBranch { graph, offsets }
}

/// Packed full graphs of both branches plus the routing used at
/// fine-tuning time.
pub struct Batch {
    pub node: PackedBranch,
    pub dual: PackedBranch,
    pub n_mols: usize,
}

pub fn pack_batch(mols: &[&PreparedMolecule]) -> Batch {
    Batch {
        node: pack_node_graphs(mols),
        dual: pack_dual_graphs(mols),
        n_mols: mols.len(),
    }
}

impl Batch {
    /// Fine-tuning view: full graphs plus per-dual-token destination atoms.
    pub fn finetune_inputs(&self, mols: &[&PreparedMolecule], with_descriptors: bool) -> FinetuneGraphInputs {
        let mut dual_token_atom = Vec::with_capacity(self.dual.graph.n_tokens);
        for (i, m) in mols.iter().enumerate() {
            let atom_off = self.node.offsets[i];
            for &(_, v) in &m.node_graph.directed_edges {
                dual_token_atom.push(atom_off + v);
            }
        }
        let descriptors = with_descriptors.then(|| {
            let mut rows = Vec::with_capacity(mols.len() * N_DESCRIPTORS);
            for m in mols {
                rows.extend_from_slice(m.descriptors.as_slice());
            }
            rows
        });
        FinetuneGraphInputs {
            node_graph: self.node.graph.clone(),
            dual_graph: self.dual.graph.clone(),
            dual_token_atom,
            n_graphs: self.n_mols,
            descriptors,
        }
    }
}

/// Per-molecule mask plans for one branch of a batch.
pub struct BranchPlans {
    pub plans: Vec<MaskPlan>,
}

/// One branch of a masked batch: the packed visible subgraph (tokens keep
/// their original molecule-local positions) and the packed-full indices of
/// visible and masked tokens.
pub struct MaskedPackedBranch {
    pub visible_graph: TokenGraph,
    /// Packed-full position of each visible token, in visible row order.
    pub visible_packed: Vec<usize>,
    /// Packed-full positions of all masked tokens.
    pub masked_packed: Vec<usize>,
}

pub fn sample_branch_plans(
    mols: &[&PreparedMolecule],
    ratio: f64,
    seeds: &[u64],
    dual: bool,
) -> Result<BranchPlans, TrainError> {
    let mut plans = Vec::with_capacity(mols.len());
    for (m, &seed) in mols.iter().zip(seeds) {
        let n = if dual {
            m.dual_graph.n_dual_nodes
        } else {
            m.node_graph.n_nodes
        };
        plans.push(sample_mask_plan(n, ratio, seed).map_err(crate::model::ModelError::from)?);
    }
    Ok(BranchPlans { plans })
}

pub fn mask_node_branch(
    mols: &[&PreparedMolecule],
    packed: &PackedBranch,
    plans: &BranchPlans,
) -> Result<MaskedPackedBranch, TrainError> {
    let mut visible_graph = empty_token_graph(packed.graph.f_token, packed.graph.f_edge);
    let mut visible_packed = Vec::new();
    let mut masked_packed = Vec::new();
    for (i, (m, plan)) in mols.iter().zip(&plans.plans).enumerate() {
        let (vis, map) = extract_visible_node_graph(&m.node_graph, plan)
            .map_err(crate::model::ModelError::from)?;
        let mut part = TokenGraph::from_node_graph(&vis);
        part.positions = map.clone();
        append_graph(&mut visible_graph, &part, i);
        let off = packed.offsets[i];
        visible_packed.extend(map.iter().map(|&p| off + p));
        masked_packed.extend(plan.masked.iter().map(|&p| off + p));
    }
    Ok(MaskedPackedBranch {
        visible_graph,
        visible_packed,
        masked_packed,
    })
}

pub fn mask_dual_branch(
    mols: &[&PreparedMolecule],
    packed: &PackedBranch,
    plans: &BranchPlans,
) -> Result<MaskedPackedBranch, TrainError> {
    let mut visible_graph = empty_token_graph(packed.graph.f_token, packed.graph.f_edge);
    let mut visible_packed = Vec::new();
    let mut masked_packed = Vec::new();
    for (i, (m, plan)) in mols.iter().zip(&plans.plans).enumerate() {
        let (vis, map) = extract_visible_dual_graph(&m.dual_graph, plan)
            .map_err(crate::model::ModelError::from)?;
        let mut part = TokenGraph::from_dual_graph(&vis);
        part.positions = map.clone();
        append_graph(&mut visible_graph, &part, i);
        let off = packed.offsets[i];
        visible_packed.extend(map.iter().map(|&p| off + p));
        masked_packed.extend(plan.masked.iter().map(|&p| off + p));
    }
    Ok(MaskedPackedBranch {
        visible_graph,
        visible_packed,
        masked_packed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn prep(smiles: &str) -> PreparedMolecule {
        PreparedMolecule::new(parse_smiles(smiles).unwrap()).unwrap()
    }

    #[test]
    fn packed_offsets_strictly_increase() {
        let mols = [prep("CCO"), prep("c1ccccc1"), prep("CC(=O)OC")];
        let refs: Vec<&PreparedMolecule> = mols.iter().collect();
        let batch = pack_batch(&refs);
        assert_eq!(batch.node.offsets, vec![0, 3, 9]);
        assert_eq!(batch.node.graph.n_tokens, 3 + 6 + 5);
        assert_eq!(batch.dual.graph.n_tokens, 4 + 12 + 8);
        // membership is block-diagonal
        for (t, &g) in batch.node.graph.graph_of.iter().enumerate() {
            let expect = if t < 3 {
                0
            } else if t < 9 {
                1
            } else {
                2
            };
            assert_eq!(g, expect);
        }
    }

    #[test]
    fn packed_edges_stay_within_their_molecule() {
        let mols = [prep("CCO"), prep("C1CC1")];
        let refs: Vec<&PreparedMolecule> = mols.iter().collect();
        let batch = pack_batch(&refs);
        for (&s, &t) in batch.node.graph.edge_src.iter().zip(&batch.node.graph.edge_dst) {
            assert_eq!(batch.node.graph.graph_of[s], batch.node.graph.graph_of[t]);
        }
        for (&s, &t) in batch.dual.graph.edge_src.iter().zip(&batch.dual.graph.edge_dst) {
            assert_eq!(batch.dual.graph.graph_of[s], batch.dual.graph.graph_of[t]);
        }
    }

    #[test]
    fn positions_are_molecule_local() {
        let mols = [prep("CCO"), prep("CCCC")];
        let refs: Vec<&PreparedMolecule> = mols.iter().collect();
        let batch = pack_batch(&refs);
        assert_eq!(batch.node.graph.positions, vec![0, 1, 2, 0, 1, 2, 3]);
    }

    #[test]
    fn masked_batch_indices_partition_tokens() {
        let mols = [prep("CC(C)CO"), prep("c1ccccc1N")];
        let refs: Vec<&PreparedMolecule> = mols.iter().collect();
        let batch = pack_batch(&refs);
        let plans = sample_branch_plans(&refs, 0.6, &[11, 12], false).unwrap();
        let masked = mask_node_branch(&refs, &batch.node, &plans).unwrap();
        let mut all: Vec<usize> = masked
            .visible_packed
            .iter()
            .chain(&masked.masked_packed)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..batch.node.graph.n_tokens).collect::<Vec<_>>());
        // visible graph tokens carry original local positions
        assert_eq!(
            masked.visible_graph.positions.len(),
            masked.visible_packed.len()
        );
    }

    #[test]
    fn dual_token_atom_routing() {
        let mols = [prep("CCO")];
        let refs: Vec<&PreparedMolecule> = mols.iter().collect();
        let batch = pack_batch(&refs);
        let inputs = batch.finetune_inputs(&refs, false);
        // directed edges of CCO: (0,1),(1,0),(1,2),(2,1) -> tails 1,0,2,1
        assert_eq!(inputs.dual_token_atom, vec![1, 0, 2, 1]);
    }

    #[test]
    fn maskable_filter() {
        assert!(!prep("C").is_maskable());
        assert!(prep("CC").is_maskable());
    }
}
