//! Atom/bond feature vectors and the molecule-level descriptor vector.
//!
//! Node features (27): element one-hot (10) + degree one-hot 0-5 (6) +
//! formal-charge one-hot -2..+2 (5) + aromatic flag (1) + explicit-H
//! one-hot 0-4 (5). Edge features (5): bond-order one-hot (4) + in-ring
//! flag (1). Dual-node features are the edge features concatenated with
//! the head atom's node features.

use alloc::vec;
use alloc::vec::Vec;

use super::{FeatMatrix, Molecule, N_ELEMENTS};

pub const F_NODE: usize = 27;
pub const F_EDGE: usize = 5;
pub const F_DUAL: usize = F_EDGE + F_NODE;
pub const N_DESCRIPTORS: usize = 24;

const DEGREE_SLOTS: usize = 6;
const CHARGE_SLOTS: usize = 5;
const H_SLOTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeaturizeError {
    #[error("atom {atom} has degree {degree}, feature scheme supports at most 5")]
    DegreeOverflow { atom: usize, degree: usize },
}

/// A contiguous slice of the feature vector treated as one prediction
/// target: either a softmax group or a single binary flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureGroup {
    Categorical { lo: usize, hi: usize },
    Binary { index: usize },
}

impl FeatureGroup {
    pub fn shifted(self, by: usize) -> FeatureGroup {
        match self {
            FeatureGroup::Categorical { lo, hi } => FeatureGroup::Categorical {
                lo: lo + by,
                hi: hi + by,
            },
            FeatureGroup::Binary { index } => FeatureGroup::Binary { index: index + by },
        }
    }
}

/// Groups of the node feature vector, with stable display names.
pub fn node_feature_groups() -> Vec<(&'static str, FeatureGroup)> {
    vec![
        ("element", FeatureGroup::Categorical { lo: 0, hi: 10 }),
        ("degree", FeatureGroup::Categorical { lo: 10, hi: 16 }),
        ("charge", FeatureGroup::Categorical { lo: 16, hi: 21 }),
        ("aromatic", FeatureGroup::Binary { index: 21 }),
        ("explicit_h", FeatureGroup::Categorical { lo: 22, hi: 27 }),
    ]
}

pub fn edge_feature_groups() -> Vec<(&'static str, FeatureGroup)> {
    vec![
        ("bond_order", FeatureGroup::Categorical { lo: 0, hi: 4 }),
        ("in_ring", FeatureGroup::Binary { index: 4 }),
    ]
}

/// Groups of the dual-node feature vector: the edge groups followed by the
/// head atom's node groups shifted past them.
pub fn dual_feature_groups() -> Vec<(&'static str, FeatureGroup)> {
    let mut groups = edge_feature_groups();
    for (name, g) in node_feature_groups() {
        groups.push((name, g.shifted(F_EDGE)));
    }
    groups
}

/// Per-atom and per-bond feature matrices.
pub fn featurize(mol: &Molecule) -> Result<(FeatMatrix, FeatMatrix), FeaturizeError> {
    let degrees = mol.degrees();
    let mut nodes = FeatMatrix::zeros(mol.n_atoms(), F_NODE);
    for (i, atom) in mol.atoms.iter().enumerate() {
        let deg = degrees[i];
        if deg >= DEGREE_SLOTS {
            return Err(FeaturizeError::DegreeOverflow {
                atom: i,
                degree: deg,
            });
        }
        let row = nodes.row_mut(i);
        row[atom.element.index()] = 1.0;
        row[N_ELEMENTS + deg] = 1.0;
        let charge_slot = (atom.formal_charge.clamp(-2, 2) + 2) as usize;
        row[N_ELEMENTS + DEGREE_SLOTS + charge_slot] = 1.0;
        if atom.aromatic {
            row[N_ELEMENTS + DEGREE_SLOTS + CHARGE_SLOTS] = 1.0;
        }
        let h_slot = (atom.explicit_h as usize).min(H_SLOTS - 1);
        row[N_ELEMENTS + DEGREE_SLOTS + CHARGE_SLOTS + 1 + h_slot] = 1.0;
    }

    let mut edges = FeatMatrix::zeros(mol.n_bonds(), F_EDGE);
    for (b, bond) in mol.bonds.iter().enumerate() {
        let row = edges.row_mut(b);
        row[bond.order.index()] = 1.0;
        if bond.in_ring {
            row[4] = 1.0;
        }
    }
    Ok((nodes, edges))
}

/// Molecule-level descriptor vector: element counts (10), bond-order
/// counts (4), ring count, aromatic-atom fraction, heavy-atom count, mean
/// degree, and 6 reserved zero slots.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorVector(pub [f64; N_DESCRIPTORS]);

impl DescriptorVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn compute_descriptors(mol: &Molecule) -> DescriptorVector {
    let mut d = [0.0f64; N_DESCRIPTORS];
    for atom in &mol.atoms {
        d[atom.element.index()] += 1.0;
    }
    for bond in &mol.bonds {
        d[N_ELEMENTS + bond.order.index()] += 1.0;
    }
    d[14] = ring_count(mol) as f64;
    let n = mol.n_atoms() as f64;
    let aromatic = mol.atoms.iter().filter(|a| a.aromatic).count() as f64;
    d[15] = aromatic / n;
    d[16] = n; // all parsed atoms are heavy atoms
    d[17] = 2.0 * mol.n_bonds() as f64 / n;
    DescriptorVector(d)
}

/// Cyclomatic number: bonds - atoms + connected components.
fn ring_count(mol: &Molecule) -> usize {
    let n = mol.n_atoms();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for bond in &mol.bonds {
        let (ra, rb) = (find(&mut parent, bond.a1), find(&mut parent, bond.a2));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    mol.n_bonds() + components - n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{parse_smiles, BondOrder, Element};

    #[test]
    fn methane_features() {
        let mol = parse_smiles("C").unwrap();
        let (nodes, edges) = featurize(&mol).unwrap();
        assert_eq!(nodes.rows, 1);
        assert_eq!(nodes.cols, F_NODE);
        assert_eq!(edges.rows, 0);
        let row = nodes.row(0);
        assert_eq!(row[Element::C.index()], 1.0);
        assert_eq!(row[N_ELEMENTS], 1.0); // degree 0
        assert_eq!(row[N_ELEMENTS + DEGREE_SLOTS + 2], 1.0); // charge 0
        assert_eq!(row[21], 0.0); // not aromatic
        assert_eq!(row[22], 1.0); // zero explicit H
        assert_eq!(row.iter().map(|&x| x as i32).sum::<i32>(), 4);
    }

    #[test]
    fn benzene_atom_features() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        let (nodes, _) = featurize(&mol).unwrap();
        for i in 0..6 {
            let row = nodes.row(i);
            assert_eq!(row[21], 1.0, "aromatic flag");
            assert_eq!(row[N_ELEMENTS + 2], 1.0, "degree 2 slot");
        }
    }

    #[test]
    fn acetic_acid_bond_features() {
        let mol = parse_smiles("CC(=O)O").unwrap();
        let (_, edges) = featurize(&mol).unwrap();
        let double = edges.row(1);
        assert_eq!(double[BondOrder::Double.index()], 1.0);
        assert_eq!(double[4], 0.0, "in-ring flag");
    }

    #[test]
    fn charge_slots() {
        let mol = parse_smiles("[NH3+]").unwrap();
        let (nodes, _) = featurize(&mol).unwrap();
        let row = nodes.row(0);
        assert_eq!(row[N_ELEMENTS + DEGREE_SLOTS + 3], 1.0); // +1
        assert_eq!(row[22 + 3], 1.0); // 3 explicit H
    }

    #[test]
    fn degree_overflow() {
        // central atom with six neighbors
        let mol = parse_smiles("C(F)(F)(F)(F)(F)F").unwrap();
        assert_eq!(
            featurize(&mol),
            Err(FeaturizeError::DegreeOverflow { atom: 0, degree: 6 })
        );
    }

    #[test]
    fn descriptors_methane() {
        let mol = parse_smiles("C").unwrap();
        let d = compute_descriptors(&mol);
        assert_eq!(d.0[16], 1.0, "heavy atom count");
        assert!(d.0[N_ELEMENTS..N_ELEMENTS + 4].iter().all(|&x| x == 0.0));
        assert_eq!(d.0[14], 0.0, "ring count");
    }

    #[test]
    fn descriptors_benzene() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        let d = compute_descriptors(&mol);
        assert_eq!(d.0[14], 1.0, "ring count");
        assert_eq!(d.0[15], 1.0, "aromatic fraction");
        assert_eq!(d.0[17], 2.0, "mean degree");
    }

    #[test]
    fn descriptors_acetic_acid() {
        let mol = parse_smiles("CC(=O)O").unwrap();
        let d = compute_descriptors(&mol);
        assert_eq!(d.0[N_ELEMENTS + BondOrder::Single.index()], 2.0);
        assert_eq!(d.0[N_ELEMENTS + BondOrder::Double.index()], 1.0);
        assert_eq!(d.0[18..24], [0.0; 6], "reserved slots");
    }

    #[test]
    fn groups_cover_every_slot_once() {
        let mut seen = [0usize; F_NODE];
        for (_, g) in node_feature_groups() {
            match g {
                FeatureGroup::Categorical { lo, hi } => {
                    for s in lo..hi {
                        seen[s] += 1;
                    }
                }
                FeatureGroup::Binary { index } => seen[index] += 1,
            }
        }
        assert!(seen.iter().all(|&c| c == 1));

        let mut seen = [0usize; F_DUAL];
        for (_, g) in dual_feature_groups() {
            match g {
                FeatureGroup::Categorical { lo, hi } => {
                    for s in lo..hi {
                        seen[s] += 1;
                    }
                }
                FeatureGroup::Binary { index } => seen[index] += 1,
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
