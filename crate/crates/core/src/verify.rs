//! The 64-bit gradient verification suite: every tensor operation checked
//! against central differences on several random points, plus an
//! end-to-end check of the full reconstruction loss on a small molecule.
//!
//! The CLI's `gradcheck` command and the acceptance tests both run this.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{collect_grads, init_pretrain_params, ModelConfig, ParamStore};
use crate::rng::SplitRng;
use crate::tensor::{grad_check, Tape, Tensor, TensorError};
use crate::train::{masked_step_forward, PreparedMolecule, TrainError};

pub const OP_TOL: f64 = 1e-6;
pub const OP_EPS: f64 = 1e-6;
pub const MODEL_TOL: f64 = 1e-5;
pub const POINTS_PER_OP: usize = 5;

#[derive(Debug, Clone)]
pub struct OpCheck {
    pub name: String,
    pub n_coords: usize,
    pub n_failed: usize,
    pub max_rel_err: f64,
}

impl OpCheck {
    pub fn passed(&self) -> bool {
        self.n_failed == 0
    }
}

#[derive(Debug, Clone)]
pub struct ModelCheck {
    pub n_coords: usize,
    pub n_failed: usize,
    pub max_rel_err: f64,
}

impl ModelCheck {
    pub fn pass_fraction(&self) -> f64 {
        if self.n_coords == 0 {
            return 1.0;
        }
        (self.n_coords - self.n_failed) as f64 / self.n_coords as f64
    }

    /// At least 99% of coordinates within tolerance.
    pub fn passed(&self) -> bool {
        self.pass_fraction() >= 0.99
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub ops: Vec<OpCheck>,
    pub model: ModelCheck,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.ops.iter().all(|o| o.passed()) && self.model.passed()
    }
}

fn rand_point(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut s = SplitRng::new(seed).stream();
    (0..n).map(|_| s.uniform(lo, hi)).collect()
}

/// Contract a tensor against fixed pseudo-random weights so every output
/// coordinate contributes to the scalar.
fn contract(tape: &mut Tape<f64>, t: Tensor, seed: u64) -> Result<Tensor, TensorError> {
    let n = tape.value(t).len();
    let shape = tape.shape(t).to_vec();
    let w = tape.constant(&shape, rand_point(seed, n, -1.0, 1.0));
    let prod = tape.mul(t, w)?;
    Ok(tape.sum_all(prod))
}

type OpFn = fn(&mut Tape<f64>, Tensor, u64) -> Result<Tensor, TensorError>;

fn check_op(name: &str, shape: &[usize], domain: (f64, f64), f: OpFn) -> Result<OpCheck, TensorError> {
    let n: usize = shape.iter().product();
    let mut worst = 0.0f64;
    let mut failed = 0;
    let mut coords = 0;
    for point_idx in 0..POINTS_PER_OP {
        let seed = 0xA11CE + 31 * point_idx as u64;
        let point = rand_point(seed, n, domain.0, domain.1);
        let report = grad_check(
            move |tape, x| f(tape, x, seed),
            shape,
            &point,
            OP_EPS,
            OP_TOL,
        )?;
        worst = libm::fmax(worst, report.max_rel_err);
        failed += report.n_failed;
        coords += report.n_coords;
    }
    Ok(OpCheck {
        name: name.into(),
        n_coords: coords,
        n_failed: failed,
        max_rel_err: worst,
    })
}

/// Gradient-check every registered operation on random points.
pub fn run_op_checks() -> Result<Vec<OpCheck>, TensorError> {
    let mut checks = Vec::new();

    checks.push(check_op("add", &[3, 4], (-2.0, 2.0), |t, x, s| {
        let other = t.leaf(&[3, 4], rand_point(s ^ 1, 12, -1.0, 1.0));
        let y = t.add(x, other)?;
        contract(t, y, s ^ 2)
    })?);
    checks.push(check_op("add_row_bias", &[4], (-2.0, 2.0), |t, x, s| {
        let m = t.leaf(&[3, 4], rand_point(s ^ 3, 12, -1.0, 1.0));
        let y = t.add(m, x)?;
        contract(t, y, s ^ 4)
    })?);
    checks.push(check_op("sub", &[3, 4], (-2.0, 2.0), |t, x, s| {
        let other = t.leaf(&[3, 4], rand_point(s ^ 5, 12, -1.0, 1.0));
        let y = t.sub(x, other)?;
        contract(t, y, s ^ 6)
    })?);
    checks.push(check_op("mul", &[3, 4], (-2.0, 2.0), |t, x, s| {
        let other = t.leaf(&[3, 4], rand_point(s ^ 7, 12, -1.0, 1.0));
        let y = t.mul(x, other)?;
        contract(t, y, s ^ 8)
    })?);
    checks.push(check_op("matmul_lhs", &[3, 4], (-1.0, 1.0), |t, x, s| {
        let rhs = t.constant(&[4, 2], rand_point(s ^ 9, 8, -1.0, 1.0));
        let y = t.matmul(x, rhs)?;
        contract(t, y, s ^ 10)
    })?);
    checks.push(check_op("matmul_rhs", &[4, 2], (-1.0, 1.0), |t, x, s| {
        let lhs = t.constant(&[3, 4], rand_point(s ^ 11, 12, -1.0, 1.0));
        let y = t.matmul(lhs, x)?;
        contract(t, y, s ^ 12)
    })?);
    checks.push(check_op("transpose", &[3, 5], (-2.0, 2.0), |t, x, s| {
        let y = t.transpose(x)?;
        contract(t, y, s ^ 13)
    })?);
    checks.push(check_op("scale", &[2, 3], (-2.0, 2.0), |t, x, s| {
        let y = t.scale(x, -1.75);
        contract(t, y, s ^ 14)
    })?);
    checks.push(check_op("reshape", &[2, 6], (-2.0, 2.0), |t, x, s| {
        let y = t.reshape(x, &[3, 4])?;
        contract(t, y, s ^ 15)
    })?);
    checks.push(check_op("concat_rows", &[2, 3], (-2.0, 2.0), |t, x, s| {
        let other = t.leaf(&[2, 3], rand_point(s ^ 16, 6, -1.0, 1.0));
        let y = t.concat(0, &[x, other, x])?;
        contract(t, y, s ^ 17)
    })?);
    checks.push(check_op("concat_cols", &[2, 3], (-2.0, 2.0), |t, x, s| {
        let other = t.leaf(&[2, 2], rand_point(s ^ 18, 4, -1.0, 1.0));
        let y = t.concat(1, &[x, other])?;
        contract(t, y, s ^ 19)
    })?);
    checks.push(check_op("slice_cols", &[3, 5], (-2.0, 2.0), |t, x, s| {
        let y = t.slice_cols(x, 1, 4)?;
        contract(t, y, s ^ 20)
    })?);
    checks.push(check_op("gather_rows", &[4, 3], (-2.0, 2.0), |t, x, s| {
        let y = t.gather_rows(x, &[2, 0, 2, 3, 2])?;
        contract(t, y, s ^ 21)
    })?);
    checks.push(check_op("scatter_add_rows", &[5, 3], (-2.0, 2.0), |t, x, s| {
        let y = t.scatter_add_rows(x, &[1, 0, 1, 3, 1], 4)?;
        contract(t, y, s ^ 22)
    })?);
    checks.push(check_op("select_rows", &[4, 3], (-2.0, 2.0), |t, x, s| {
        let y = t.select_rows(x, &[true, false, true, true])?;
        contract(t, y, s ^ 23)
    })?);
    checks.push(check_op("softmax_rows", &[3, 5], (-3.0, 3.0), |t, x, s| {
        let y = t.softmax_rows(x)?;
        contract(t, y, s ^ 24)
    })?);
    checks.push(check_op("logsumexp_rows", &[3, 5], (-3.0, 3.0), |t, x, s| {
        let lse = t.logsumexp_rows(x)?;
        contract(t, lse, s ^ 25)
    })?);
    checks.push(check_op("tanh", &[3, 4], (-2.0, 2.0), |t, x, s| {
        let y = t.tanh(x);
        contract(t, y, s ^ 26)
    })?);
    checks.push(check_op("relu", &[3, 4], (-2.0, 2.0), |t, x, s| {
        let y = t.relu(x);
        contract(t, y, s ^ 27)
    })?);
    checks.push(check_op("sigmoid", &[3, 4], (-3.0, 3.0), |t, x, s| {
        let y = t.sigmoid(x);
        contract(t, y, s ^ 28)
    })?);
    checks.push(check_op("ln", &[3, 4], (0.3, 3.0), |t, x, s| {
        let y = t.ln(x);
        contract(t, y, s ^ 29)
    })?);
    checks.push(check_op("sqrt", &[3, 4], (0.3, 3.0), |t, x, s| {
        let y = t.sqrt(x);
        contract(t, y, s ^ 30)
    })?);
    checks.push(check_op("softplus", &[3, 4], (-3.0, 3.0), |t, x, s| {
        let y = t.softplus(x);
        contract(t, y, s ^ 31)
    })?);
    checks.push(check_op("clamp", &[3, 4], (-2.0, 2.0), |t, x, s| {
        // bounds beyond the sample domain avoid kink straddling
        let y = t.clamp(x, -5.0, 5.0);
        contract(t, y, s ^ 32)
    })?);
    checks.push(check_op("layer_norm_input", &[3, 6], (-2.0, 2.0), |t, x, s| {
        let gamma = t.leaf(&[6], rand_point(s ^ 33, 6, 0.5, 1.5));
        let beta = t.leaf(&[6], rand_point(s ^ 34, 6, -0.5, 0.5));
        let y = t.layer_norm(x, gamma, beta)?;
        contract(t, y, s ^ 35)
    })?);
    checks.push(check_op("layer_norm_affine", &[6], (0.5, 1.5), |t, x, s| {
        let input = t.leaf(&[3, 6], rand_point(s ^ 36, 18, -2.0, 2.0));
        let beta = t.leaf(&[6], rand_point(s ^ 37, 6, -0.5, 0.5));
        let y = t.layer_norm(input, x, beta)?;
        contract(t, y, s ^ 38)
    })?);
    checks.push(check_op("sum_all", &[3, 4], (-2.0, 2.0), |t, x, _s| {
        Ok(t.sum_all(x))
    })?);

    Ok(checks)
}

/// Adjointness of scatter-add: its backward is exactly a gather of the
/// upstream gradient. Verified on random instances directly.
pub fn check_scatter_adjointness() -> Result<bool, TensorError> {
    let mut ok = true;
    for seed in 0..10u64 {
        let mut s = SplitRng::new(seed).stream();
        let rows = 3 + s.below(6) as usize;
        let cols = 1 + s.below(4) as usize;
        let n_groups = 2 + s.below(4) as usize;
        let groups: Vec<usize> = (0..rows).map(|_| s.below(n_groups as u64) as usize).collect();

        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(&[rows, cols], rand_point(seed ^ 99, rows * cols, -1.0, 1.0));
        let y = tape.scatter_add_rows(x, &groups, n_groups)?;
        let upstream = rand_point(seed ^ 100, n_groups * cols, -1.0, 1.0);
        let w = tape.constant(&[n_groups, cols], upstream.clone());
        let prod = tape.mul(y, w)?;
        let loss = tape.sum_all(prod);
        tape.backward(loss)?;
        let got = tape.grad(x).expect("leaf grad");
        for (i, &g) in groups.iter().enumerate() {
            for j in 0..cols {
                let expect = upstream[g * cols + j];
                if (got[i * cols + j] - expect).abs() > 1e-12 {
                    ok = false;
                }
            }
        }
    }
    Ok(ok)
}

/// Tiny end-to-end configuration: hidden 8, two encoder blocks, one
/// decoder block, checked on one five-atom molecule.
pub fn tiny_check_config() -> ModelConfig {
    ModelConfig {
        hidden: 8,
        encoder_blocks: 2,
        decoder_blocks: 1,
        heads: 2,
        gnn_steps: 1,
        ..ModelConfig::default()
    }
}

/// Central-difference check of the full pre-training loss against every
/// parameter coordinate of the tiny model.
pub fn run_model_gradient_check() -> Result<ModelCheck, TrainError> {
    let config = tiny_check_config();
    let mol = PreparedMolecule::new(crate::molgraph::parse_smiles("CC(=O)OC").expect("fixture"))
        .expect("fixture featurizes");
    let mols = [&mol];
    let node_seeds = [41u64];
    let edge_seeds = [42u64];

    // jitter every array (biases included) so no relu sits exactly at its
    // kink for the isolated-node zero-aggregation paths
    let mut store: ParamStore<f64> = init_pretrain_params(&config, 7);
    let mut jitter = SplitRng::new(0xD1CE).stream();
    for e in store.entries_mut() {
        for v in e.data.iter_mut() {
            *v += jitter.uniform(-0.05, 0.05);
        }
    }

    let eval_loss = |s: &ParamStore<f64>| -> Result<f64, TrainError> {
        let (_tape, _bound, out) =
            masked_step_forward(&mols, &config, s, &node_seeds, &edge_seeds, None)?;
        Ok(out.total_value())
    };

    // analytic gradients
    let (mut tape, bound, out) =
        masked_step_forward(&mols, &config, &store, &node_seeds, &edge_seeds, None)?;
    tape.backward(out.total).map_err(crate::model::ModelError::from)?;
    let analytic = collect_grads(&tape, &bound);
    drop(tape);

    let mut n_coords = 0;
    let mut n_failed = 0;
    let mut max_rel_err = 0.0f64;
    let mut probe = store.clone();
    for (ei, entry) in store.entries().iter().enumerate() {
        for j in 0..entry.data.len() {
            let orig = entry.data[j];
            let h = OP_EPS * libm::fmax(1.0, libm::fabs(orig));
            probe.entries_mut()[ei].data[j] = orig + h;
            let fp = eval_loss(&probe)?;
            probe.entries_mut()[ei].data[j] = orig - h;
            let fm = eval_loss(&probe)?;
            probe.entries_mut()[ei].data[j] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[ei][j];
            let denom = libm::fmax(1.0, libm::fmax(libm::fabs(a), libm::fabs(numeric)));
            let rel = libm::fabs(a - numeric) / denom;
            n_coords += 1;
            if rel > MODEL_TOL {
                n_failed += 1;
            }
            max_rel_err = libm::fmax(max_rel_err, rel);
        }
    }

    Ok(ModelCheck {
        n_coords,
        n_failed,
        max_rel_err,
    })
}

pub fn run_gradient_suite() -> Result<SuiteReport, TrainError> {
    let ops = run_op_checks().map_err(crate::model::ModelError::from)?;
    if !check_scatter_adjointness().map_err(crate::model::ModelError::from)? {
        return Err(TrainError::ShapeMismatch(
            "scatter_add adjointness violated".into(),
        ));
    }
    let model = run_model_gradient_check()?;
    Ok(SuiteReport { ops, model })
}

pub fn format_report(report: &SuiteReport) -> String {
    let mut out = String::new();
    for op in &report.ops {
        out += &format!(
            "op {:<18} coords {:>4} failed {:>2} max_rel_err {:.3e} {}\n",
            op.name,
            op.n_coords,
            op.n_failed,
            op.max_rel_err,
            if op.passed() { "pass" } else { "FAIL" }
        );
    }
    out += &format!(
        "model end-to-end    coords {:>6} failed {:>3} max_rel_err {:.3e} pass_fraction {:.4} {}\n",
        report.model.n_coords,
        report.model.n_failed,
        report.model.max_rel_err,
        report.model.pass_fraction(),
        if report.model.passed() { "pass" } else { "FAIL" }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_checks_pass() {
        let checks = run_op_checks().unwrap();
        for c in &checks {
            assert!(c.passed(), "{} max_rel_err {}", c.name, c.max_rel_err);
        }
        assert!(checks.len() >= 25, "all registered ops covered");
    }

    #[test]
    fn scatter_adjointness_holds() {
        assert!(check_scatter_adjointness().unwrap());
    }
}
