//! Named parameter storage. Parameters live outside tapes as plain arrays;
//! each forward pass binds them onto a fresh tape as leaf tensors. The
//! stable names double as the checkpoint array table.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::config::ModelConfig;
use crate::nn::{AttentionTensors, BlockTensors, GnnStackTensors};
use crate::real::Real;
use crate::rng::SplitRng;
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone)]
pub struct ParamEntry<R: Real> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<R>,
}

/// Ordered collection of named arrays. Iteration order is insertion order
/// (stable per config), lookup is by name.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<R: Real> {
    entries: Vec<ParamEntry<R>>,
    index: BTreeMap<String, usize>,
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, shape: &[usize], data: Vec<R>) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "{name}");
        assert!(
            self.index.insert(name.to_string(), self.entries.len()).is_none(),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
        });
    }

    pub fn entries(&self) -> &[ParamEntry<R>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<R>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry<R>> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamEntry<R>> {
        let i = *self.index.get(name)?;
        Some(&mut self.entries[i])
    }

    pub fn index_of(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    /// Total learnable scalar count.
    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    /// Convert every array to another precision.
    pub fn to_precision<R2: Real>(&self) -> ParamStore<R2> {
        let mut out = ParamStore::new();
        for e in &self.entries {
            out.insert(
                &e.name,
                &e.shape,
                e.data.iter().map(|&x| R2::from_f64(x.to_f64())).collect(),
            );
        }
        out
    }
}

/// All parameters of a store bound onto a tape as leaves.
pub struct Bound<'s, R: Real> {
    store: &'s ParamStore<R>,
    pub tensors: Vec<Tensor>,
}

impl<'s, R: Real> Bound<'s, R> {
    pub fn t(&self, name: &str) -> Tensor {
        self.tensors[self.store.index_of(name)]
    }
}

pub fn bind<'s, R: Real>(tape: &mut Tape<R>, store: &'s ParamStore<R>) -> Bound<'s, R> {
    let tensors = store
        .entries()
        .iter()
        .map(|e| tape.leaf(&e.shape, e.data.clone()))
        .collect();
    Bound { store, tensors }
}

/// Gradients for every store entry after a backward pass, aligned with
/// entry order.
pub fn collect_grads<R: Real>(tape: &Tape<R>, bound: &Bound<'_, R>) -> Vec<Vec<R>> {
    bound
        .tensors
        .iter()
        .map(|&t| match tape.grad(t) {
            Some(g) => g.to_vec(),
            None => vec![R::ZERO; tape.value(t).len()],
        })
        .collect()
}

fn uniform_matrix<R: Real>(rng: &SplitRng, name: &str, len: usize, bound: f64) -> Vec<R> {
    let mut stream = rng.derive(name).stream();
    (0..len)
        .map(|_| R::from_f64(stream.uniform(-bound, bound)))
        .collect()
}

struct Builder<'c, R: Real> {
    store: ParamStore<R>,
    rng: SplitRng,
    config: &'c ModelConfig,
}

impl<'c, R: Real> Builder<'c, R> {
    fn weight(&mut self, name: &str, rows: usize, cols: usize) {
        let bound = 1.0 / libm::sqrt(self.config.hidden as f64);
        let data = uniform_matrix(&self.rng, name, rows * cols, bound);
        self.store.insert(name, &[rows, cols], data);
    }

    fn zeros_vec(&mut self, name: &str, len: usize) {
        self.store.insert(name, &[len], vec![R::ZERO; len]);
    }

    fn ones_vec(&mut self, name: &str, len: usize) {
        self.store.insert(name, &[len], vec![R::ONE; len]);
    }

    fn gnn_stack(&mut self, prefix: &str, f_edge: usize) {
        let d = self.config.hidden;
        self.weight(&format!("{prefix}.edge_proj"), f_edge, d);
        self.weight(&format!("{prefix}.msg_w"), 2 * d, d);
        self.zeros_vec(&format!("{prefix}.msg_b"), d);
        for k in 0..self.config.gnn_steps {
            self.weight(&format!("{prefix}.step{k}.w"), d, d);
            self.zeros_vec(&format!("{prefix}.step{k}.b"), d);
        }
    }

    fn block(&mut self, prefix: &str, f_edge: usize) {
        let d = self.config.hidden;
        let dk = d / self.config.heads;
        self.gnn_stack(&format!("{prefix}.gq"), f_edge);
        self.gnn_stack(&format!("{prefix}.gk"), f_edge);
        self.gnn_stack(&format!("{prefix}.gv"), f_edge);
        for h in 0..self.config.heads {
            self.weight(&format!("{prefix}.attn.h{h}.wq"), d, dk);
            self.weight(&format!("{prefix}.attn.h{h}.wk"), d, dk);
            self.weight(&format!("{prefix}.attn.h{h}.wv"), d, dk);
        }
        self.weight(&format!("{prefix}.attn.wo"), d, d);
        self.weight(&format!("{prefix}.ffn.w1"), d, 4 * d);
        self.zeros_vec(&format!("{prefix}.ffn.b1"), 4 * d);
        self.weight(&format!("{prefix}.ffn.w2"), 4 * d, d);
        self.zeros_vec(&format!("{prefix}.ffn.b2"), d);
        self.ones_vec(&format!("{prefix}.ln1.g"), d);
        self.zeros_vec(&format!("{prefix}.ln1.b"), d);
        self.ones_vec(&format!("{prefix}.ln2.g"), d);
        self.zeros_vec(&format!("{prefix}.ln2.b"), d);
    }

    /// Encoder-side parameters of one branch (kept at fine-tune time).
    fn branch_encoder(&mut self, br: &str, f_token: usize, f_edge: usize) {
        let d = self.config.hidden;
        self.weight(&format!("{br}.in_proj.w"), f_token, d);
        self.zeros_vec(&format!("{br}.in_proj.b"), d);
        for i in 0..self.config.encoder_blocks {
            self.block(&format!("{br}.enc{i}"), f_edge);
        }
        self.weight(&format!("{br}.tail.w1"), 2 * d, d);
        self.zeros_vec(&format!("{br}.tail.b1"), d);
        self.weight(&format!("{br}.tail.w2"), d, d);
        self.zeros_vec(&format!("{br}.tail.b2"), d);
        self.ones_vec(&format!("{br}.tail.ln.g"), d);
        self.zeros_vec(&format!("{br}.tail.ln.b"), d);
    }

    /// Decoder-side parameters of one branch (pre-training only).
    fn branch_decoder(&mut self, br: &str, f_edge: usize, f_out: usize) {
        let d = self.config.hidden;
        self.store
            .insert(&format!("{br}.mask_token"), &[1, d], vec![R::ZERO; d]);
        for i in 0..self.config.decoder_blocks {
            self.block(&format!("{br}.dec{i}"), f_edge);
        }
        self.weight(&format!("{br}.recon.w"), d, f_out);
        self.zeros_vec(&format!("{br}.recon.b"), f_out);
    }
}

/// Parameters of the pre-training autoencoder (both branches).
pub fn init_pretrain_params<R: Real>(config: &ModelConfig, seed: u64) -> ParamStore<R> {
    let mut b = Builder {
        store: ParamStore::new(),
        rng: SplitRng::new(seed).derive("init"),
        config,
    };
    b.branch_encoder("node", config.f_node, config.f_edge);
    b.branch_decoder("node", config.f_edge, config.f_node);
    b.branch_encoder("edge", config.f_dual, config.f_node);
    b.branch_decoder("edge", config.f_node, config.f_dual);
    b.store
}

fn is_encoder_entry(name: &str) -> bool {
    let rest = name
        .strip_prefix("node.")
        .or_else(|| name.strip_prefix("edge."));
    match rest {
        Some(r) => r.starts_with("in_proj") || r.starts_with("enc") || r.starts_with("tail"),
        None => false,
    }
}

/// Fine-tuning parameters: the encoder halves of both branches (copied
/// from `pretrained` when given, freshly initialized otherwise) plus the
/// shared self-attentive readout and per-branch prediction heads.
///
/// Fails when a pretrained store is missing an encoder array or carries
/// one with the wrong shape (checkpoint/config mismatch).
pub fn init_finetune_params<R: Real>(
    config: &ModelConfig,
    seed: u64,
    n_tasks: usize,
    with_descriptors: bool,
    pretrained: Option<&ParamStore<R>>,
) -> Result<ParamStore<R>, String> {
    let mut b = Builder {
        store: ParamStore::new(),
        rng: SplitRng::new(seed).derive("init"),
        config,
    };
    b.branch_encoder("node", config.f_node, config.f_edge);
    b.branch_encoder("edge", config.f_dual, config.f_node);

    let d = config.hidden;
    b.weight("readout.w1", config.attn_hidden, d);
    b.weight("readout.w2", config.attn_out, config.attn_hidden);
    let g_dim = config.attn_out * d + if with_descriptors { crate::molgraph::N_DESCRIPTORS } else { 0 };
    for br in ["node", "edge"] {
        b.weight(&format!("{br}.head.w1"), g_dim, config.attn_hidden);
        b.zeros_vec(&format!("{br}.head.b1"), config.attn_hidden);
        b.weight(&format!("{br}.head.w2"), config.attn_hidden, n_tasks);
        b.zeros_vec(&format!("{br}.head.b2"), n_tasks);
    }

    let mut store = b.store;
    if let Some(src) = pretrained {
        for e in store.entries_mut() {
            if is_encoder_entry(&e.name) {
                let from = src
                    .get(&e.name)
                    .ok_or_else(|| format!("pretrained parameters missing {}", e.name))?;
                if from.shape != e.shape {
                    return Err(format!(
                        "pretrained {} has shape {:?}, config expects {:?}",
                        e.name, from.shape, e.shape
                    ));
                }
                e.data = from.data.clone();
            }
        }
    }
    Ok(store)
}

/// Bind one GNN stack's tensors by prefix.
pub fn stack_tensors<R: Real>(
    bound: &Bound<'_, R>,
    prefix: &str,
    gnn_steps: usize,
) -> GnnStackTensors {
    GnnStackTensors {
        edge_proj: bound.t(&format!("{prefix}.edge_proj")),
        msg_w: bound.t(&format!("{prefix}.msg_w")),
        msg_b: bound.t(&format!("{prefix}.msg_b")),
        steps: (0..gnn_steps)
            .map(|k| {
                (
                    bound.t(&format!("{prefix}.step{k}.w")),
                    bound.t(&format!("{prefix}.step{k}.b")),
                )
            })
            .collect(),
    }
}

/// Bind one GNN-Attention block's tensors by prefix.
pub fn block_tensors<R: Real>(
    bound: &Bound<'_, R>,
    prefix: &str,
    config: &ModelConfig,
) -> BlockTensors {
    BlockTensors {
        gq: stack_tensors(bound, &format!("{prefix}.gq"), config.gnn_steps),
        gk: stack_tensors(bound, &format!("{prefix}.gk"), config.gnn_steps),
        gv: stack_tensors(bound, &format!("{prefix}.gv"), config.gnn_steps),
        attn: AttentionTensors {
            heads: (0..config.heads)
                .map(|h| {
                    (
                        bound.t(&format!("{prefix}.attn.h{h}.wq")),
                        bound.t(&format!("{prefix}.attn.h{h}.wk")),
                        bound.t(&format!("{prefix}.attn.h{h}.wv")),
                    )
                })
                .collect(),
            wo: bound.t(&format!("{prefix}.attn.wo")),
        },
        ffn_w1: bound.t(&format!("{prefix}.ffn.w1")),
        ffn_b1: bound.t(&format!("{prefix}.ffn.b1")),
        ffn_w2: bound.t(&format!("{prefix}.ffn.w2")),
        ffn_b2: bound.t(&format!("{prefix}.ffn.b2")),
        ln1_gamma: bound.t(&format!("{prefix}.ln1.g")),
        ln1_beta: bound.t(&format!("{prefix}.ln1.b")),
        ln2_gamma: bound.t(&format!("{prefix}.ln2.g")),
        ln2_beta: bound.t(&format!("{prefix}.ln2.b")),
    }
}

/// Exact learnable-scalar count with a per-component breakdown.
#[derive(Debug, Clone)]
pub struct ParamCount {
    pub total: usize,
    pub encoder: usize,
    pub decoder: usize,
    pub components: Vec<(String, usize)>,
}

pub fn count_parameters(config: &ModelConfig) -> ParamCount {
    let store: ParamStore<f32> = init_pretrain_params(config, 0);
    let mut components: BTreeMap<String, usize> = BTreeMap::new();
    let mut encoder = 0;
    let mut decoder = 0;
    for e in store.entries() {
        let comp = component_of(&e.name);
        *components.entry(comp).or_insert(0) += e.data.len();
        if is_encoder_entry(&e.name) {
            encoder += e.data.len();
        } else {
            decoder += e.data.len();
        }
    }
    ParamCount {
        total: store.n_scalars(),
        encoder,
        decoder,
        components: components.into_iter().collect(),
    }
}

fn component_of(name: &str) -> String {
    let mut parts = name.splitn(2, '.');
    let branch = parts.next().unwrap_or("");
    let rest = parts.next().unwrap_or("");
    let section = if rest.starts_with("enc") {
        "encoder_blocks"
    } else if rest.starts_with("dec") {
        "decoder_blocks"
    } else if rest.starts_with("in_proj") {
        "input_projection"
    } else if rest.starts_with("tail") {
        "tail"
    } else if rest.starts_with("mask_token") {
        "mask_token"
    } else if rest.starts_with("recon") {
        "reconstruction_head"
    } else {
        "other"
    };
    format!("{branch}.{section}")
}
