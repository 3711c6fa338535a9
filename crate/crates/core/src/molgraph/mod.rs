//! Molecular graphs: SMILES parsing, featurization, and the directed dual
//! (line) graph consumed by the edge branch.

mod featurize;
mod graph;
mod smiles;

pub use featurize::{
    compute_descriptors, featurize, dual_feature_groups, edge_feature_groups,
    node_feature_groups, DescriptorVector, FeatureGroup, FeaturizeError, F_DUAL, F_EDGE, F_NODE,
    N_DESCRIPTORS,
};
pub use graph::{build_dual_graph, build_node_graph, DualGraph, NodeGraph};
pub use smiles::{parse_smiles, SmilesError};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// The ten elements of the supported dialect, in feature-slot order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

pub const N_ELEMENTS: usize = 10;

impl Element {
    pub fn index(self) -> usize {
        match self {
            Element::B => 0,
            Element::C => 1,
            Element::N => 2,
            Element::O => 3,
            Element::P => 4,
            Element::S => 5,
            Element::F => 6,
            Element::Cl => 7,
            Element::Br => 8,
            Element::I => 9,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn index(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomRecord {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i32,
    pub explicit_h: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BondRecord {
    pub a1: usize,
    pub a2: usize,
    pub order: BondOrder,
    pub in_ring: bool,
}

/// Attributed molecular graph in SMILES appearance order.
#[derive(Clone, Debug, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<AtomRecord>,
    pub bonds: Vec<BondRecord>,
    pub source_text: String,
}

impl Molecule {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// Degree (bond count) of each atom.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.atoms.len()];
        for b in &self.bonds {
            deg[b.a1] += 1;
            deg[b.a2] += 1;
        }
        deg
    }
}

/// Dense row-major feature matrix. Feature values are exact small integers
/// stored as `f32`, so converting to either tensor precision is lossless.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl FeatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}
