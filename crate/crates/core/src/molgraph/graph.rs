//! The directed node-graph and its dual (line) graph.
//!
//! Bond `b` contributes directed edges `2b` (a1 -> a2) and `2b+1`
//! (a2 -> a1). The dual graph has one node per directed edge; dual node
//! `(v, w)` receives a dual edge from every `(u, v)` with `u != w`, so a
//! message never flows straight back along the edge it arrived on.

use alloc::vec;
use alloc::vec::Vec;

use super::{featurize, FeatMatrix, FeaturizeError, Molecule, F_DUAL, F_NODE};

/// Directed molecular graph with per-node and per-directed-edge features.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGraph {
    pub n_nodes: usize,
    pub node_features: FeatMatrix,
    /// (head u, tail v) per directed edge; edge `2b` and `2b+1` are the two
    /// directions of bond `b`.
    pub directed_edges: Vec<(usize, usize)>,
    /// One row per directed edge (both directions share the bond features).
    pub edge_features: FeatMatrix,
    /// For each node v, the incoming edges as (neighbor u, edge id of u->v).
    pub neighbors_in: Vec<Vec<(usize, usize)>>,
}

/// Directed line graph: one dual node per directed edge of the node-graph.
#[derive(Clone, Debug, PartialEq)]
pub struct DualGraph {
    pub n_dual_nodes: usize,
    /// Bond features concatenated with the head atom's features.
    pub dual_node_features: FeatMatrix,
    /// (source dual node (u,v), target dual node (v,w)) with u != w.
    pub dual_edges: Vec<(usize, usize)>,
    /// One row per dual edge: the shared atom v's node features.
    pub dual_edge_features: FeatMatrix,
}

pub fn build_node_graph(mol: &Molecule) -> Result<NodeGraph, FeaturizeError> {
    let (node_features, bond_features) = featurize(mol)?;
    let n_nodes = mol.n_atoms();
    let mut directed_edges = Vec::with_capacity(2 * mol.n_bonds());
    let mut edge_features = FeatMatrix::zeros(2 * mol.n_bonds(), bond_features.cols);
    let mut neighbors_in: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_nodes];

    for (b, bond) in mol.bonds.iter().enumerate() {
        let feat = bond_features.row(b).to_vec();
        let fwd = 2 * b;
        let rev = 2 * b + 1;
        directed_edges.push((bond.a1, bond.a2));
        directed_edges.push((bond.a2, bond.a1));
        edge_features.row_mut(fwd).copy_from_slice(&feat);
        edge_features.row_mut(rev).copy_from_slice(&feat);
        neighbors_in[bond.a2].push((bond.a1, fwd));
        neighbors_in[bond.a1].push((bond.a2, rev));
    }

    Ok(NodeGraph {
        n_nodes,
        node_features,
        directed_edges,
        edge_features,
        neighbors_in,
    })
}

pub fn build_dual_graph(g: &NodeGraph) -> DualGraph {
    let n_dual = g.directed_edges.len();
    debug_assert_eq!(g.node_features.cols, F_NODE);

    let mut dual_node_features = FeatMatrix::zeros(n_dual, F_DUAL);
    for (e, &(head, _tail)) in g.directed_edges.iter().enumerate() {
        let row = dual_node_features.row_mut(e);
        row[..g.edge_features.cols].copy_from_slice(g.edge_features.row(e));
        row[g.edge_features.cols..].copy_from_slice(g.node_features.row(head));
    }

    // dual node (v, w) <- every (u, v) with u != w
    let mut dual_edges = Vec::new();
    let mut shared_atoms = Vec::new();
    for (e2, &(v, w)) in g.directed_edges.iter().enumerate() {
        for &(u, e1) in &g.neighbors_in[v] {
            if u != w {
                dual_edges.push((e1, e2));
                shared_atoms.push(v);
            }
        }
    }

    let mut dual_edge_features = FeatMatrix::zeros(dual_edges.len(), F_NODE);
    for (i, &v) in shared_atoms.iter().enumerate() {
        dual_edge_features
            .row_mut(i)
            .copy_from_slice(g.node_features.row(v));
    }

    DualGraph {
        n_dual_nodes: n_dual,
        dual_node_features,
        dual_edges,
        dual_edge_features,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use alloc::collections::BTreeSet;

    fn graph(smiles: &str) -> NodeGraph {
        build_node_graph(&parse_smiles(smiles).unwrap()).unwrap()
    }

    /// Brute-force dual-edge oracle: test every ordered pair of directed
    /// edges against the shared-vertex/exclusion rule.
    fn dual_edges_oracle(g: &NodeGraph) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (e1, &(u, v1)) in g.directed_edges.iter().enumerate() {
            for (e2, &(v2, w)) in g.directed_edges.iter().enumerate() {
                if v1 == v2 && u != w {
                    out.insert((e1, e2));
                }
            }
        }
        out
    }

    #[test]
    fn one_bond_two_directed_edges() {
        let g = graph("CC");
        assert_eq!(g.directed_edges.len(), 2);
        assert_eq!(g.directed_edges[0], (0, 1));
        assert_eq!(g.directed_edges[1], (1, 0));
    }

    #[test]
    fn single_atom_graph() {
        let g = graph("C");
        assert_eq!(g.n_nodes, 1);
        assert!(g.directed_edges.is_empty());
        assert!(g.neighbors_in[0].is_empty());
    }

    #[test]
    fn benzene_node_graph() {
        let g = graph("c1ccccc1");
        assert_eq!(g.n_nodes, 6);
        assert_eq!(g.directed_edges.len(), 12);
        assert!(g.neighbors_in.iter().all(|n| n.len() == 2));
    }

    #[test]
    fn single_bond_dual() {
        let dg = build_dual_graph(&graph("CC"));
        assert_eq!(dg.n_dual_nodes, 2);
        assert!(dg.dual_edges.is_empty());
    }

    #[test]
    fn path_dual() {
        // A-B-C: exactly (A->B)->(B->C) and (C->B)->(B->A)
        let g = graph("CCC");
        let dg = build_dual_graph(&g);
        assert_eq!(dg.n_dual_nodes, 4);
        let got: BTreeSet<_> = dg.dual_edges.iter().copied().collect();
        // bond 0 = A-B (edges 0: A->B, 1: B->A), bond 1 = B-C (2: B->C, 3: C->B)
        let expect: BTreeSet<_> = [(0, 2), (3, 1)].into_iter().collect();
        assert_eq!(got, expect);
        assert_eq!(got, dual_edges_oracle(&g));
    }

    #[test]
    fn triangle_dual() {
        let g = graph("C1CC1");
        let dg = build_dual_graph(&g);
        assert_eq!(dg.n_dual_nodes, 6);
        assert_eq!(dg.dual_edges.len(), 6);
        let got: BTreeSet<_> = dg.dual_edges.iter().copied().collect();
        assert_eq!(got, dual_edges_oracle(&g));
        // each dual node has exactly one in-neighbor
        let mut indeg = [0usize; 6];
        for &(_, dst) in &dg.dual_edges {
            indeg[dst] += 1;
        }
        assert!(indeg.iter().all(|&d| d == 1));
    }

    #[test]
    fn dual_edge_count_formula() {
        for smiles in ["CCC", "C1CC1", "c1ccccc1", "CC(C)(C)C", "CC(=O)Oc1ccccc1C(=O)O"] {
            let mol = parse_smiles(smiles).unwrap();
            let g = build_node_graph(&mol).unwrap();
            let dg = build_dual_graph(&g);
            let expected: usize = mol.degrees().iter().map(|&d| d * (d.saturating_sub(1))).sum();
            assert_eq!(dg.dual_edges.len(), expected, "{smiles}");
            assert_eq!(dg.n_dual_nodes, 2 * mol.n_bonds(), "{smiles}");
        }
    }

    #[test]
    fn dual_features_are_edge_plus_head() {
        let g = graph("CO");
        let dg = build_dual_graph(&g);
        // dual node 0 is C->O: head atom C
        let row = dg.dual_node_features.row(0);
        assert_eq!(&row[..5], g.edge_features.row(0));
        assert_eq!(&row[5..], g.node_features.row(0));
        // dual node 1 is O->C: head atom O
        let row = dg.dual_node_features.row(1);
        assert_eq!(&row[5..], g.node_features.row(1));
    }
}
