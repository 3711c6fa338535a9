//! Bi-branch masked graph autoencoder for molecular graphs.
//!
//! The crate is organised around the pre-training/fine-tuning pipeline:
//!
//! * [`molgraph`]: SMILES parsing, atom/bond featurization, the node-graph
//!   and its directed dual (line) graph.
//! * [`tensor`]: a small dense-tensor engine with reverse-mode automatic
//!   differentiation and a finite-difference gradient checker.
//! * [`nn`]: sinusoidal positions, the message-passing GNN layer,
//!   multi-head attention, and the composite GNN-Attention block.
//! * [`masking`]: seeded node/directed-edge mask plans, visible-subgraph
//!   extraction, and feature reordering with mask tokens.
//! * [`model`]: the bi-branch asymmetric encoder/decoder, reconstruction
//!   and fine-tuning losses, and parameter accounting.
//! * [`train`]: Adam with the Noam schedule, dataset splitting, batching,
//!   ROC-AUC, and the pre-training / fine-tuning / ablation loops.
//! * [`verify`]: the 64-bit gradient suite used by tests and the CLI.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all file and process
//! handling lives in the companion CLI crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;



pub mod masking;
pub mod molgraph;
pub mod model;
pub mod nn;

pub mod real;
pub mod rng;
pub mod train;
pub mod verify;
pub mod tensor;



pub use real::Real;
