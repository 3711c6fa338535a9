//! Pre-training reconstruction loss and the fine-tuning loss.
//!
//! Reconstruction treats the feature vector as a sequence of groups:
//! softmax cross-entropy per categorical slice plus binary cross-entropy
//! per flag, summed over the masked items of both branches. Only masked
//! rows enter the computation, so visible-position logits cannot affect
//! the value even in the last bit.

use alloc::vec;
use alloc::vec::Vec;

use super::ModelError;
use crate::molgraph::FeatureGroup;
use crate::real::Real;
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone)]
pub struct GroupStat {
    pub name: &'static str,
    pub correct: usize,
    pub total: usize,
}

impl GroupStat {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

pub struct BranchLoss {
    pub loss: Tensor,
    pub loss_value: f64,
    pub n_masked: usize,
    pub groups: Vec<GroupStat>,
}

/// Grouped cross-entropy over the masked rows of one branch.
pub fn masked_reconstruction_loss<R: Real>(
    tape: &mut Tape<R>,
    logits: Tensor,
    targets: Tensor,
    masked: &[usize],
    groups: &[(&'static str, FeatureGroup)],
) -> Result<BranchLoss, ModelError> {
    if masked.is_empty() {
        return Err(ModelError::EmptyMaskSet);
    }
    let ml = tape.gather_rows(logits, masked)?;
    let mt = tape.gather_rows(targets, masked)?;
    let m = masked.len();

    let mut total: Option<Tensor> = None;
    let mut stats = Vec::with_capacity(groups.len());
    for &(name, group) in groups {
        let (term, correct) = match group {
            FeatureGroup::Categorical { lo, hi } => {
                let zg = tape.slice_cols(ml, lo, hi)?;
                let yg = tape.slice_cols(mt, lo, hi)?;
                let lse = tape.logsumexp_rows(zg)?;
                let lse_sum = tape.sum_all(lse);
                let picked = tape.mul(zg, yg)?;
                let picked_sum = tape.sum_all(picked);
                let term = tape.sub(lse_sum, picked_sum)?;

                let width = hi - lo;
                let zv = tape.value(zg);
                let yv = tape.value(yg);
                let mut correct = 0;
                for i in 0..m {
                    let row = &zv[i * width..(i + 1) * width];
                    let trow = &yv[i * width..(i + 1) * width];
                    let pred = argmax(row);
                    let truth = argmax(trow);
                    if pred == truth {
                        correct += 1;
                    }
                }
                (term, correct)
            }
            FeatureGroup::Binary { index } => {
                let z = tape.slice_cols(ml, index, index + 1)?;
                let y = tape.slice_cols(mt, index, index + 1)?;
                // bce-with-logits: softplus(z) - z*y
                let sp = tape.softplus(z);
                let sp_sum = tape.sum_all(sp);
                let zy = tape.mul(z, y)?;
                let zy_sum = tape.sum_all(zy);
                let term = tape.sub(sp_sum, zy_sum)?;

                let zv = tape.value(z);
                let yv = tape.value(y);
                let mut correct = 0;
                for i in 0..m {
                    let pred = zv[i] > R::ZERO;
                    let truth = yv[i].to_f64() > 0.5;
                    if pred == truth {
                        correct += 1;
                    }
                }
                (term, correct)
            }
        };
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
        stats.push(GroupStat {
            name,
            correct,
            total: m,
        });
    }

    let loss = total.expect("at least one feature group");
    Ok(BranchLoss {
        loss,
        loss_value: tape.value(loss)[0].to_f64(),
        n_masked: m,
        groups: stats,
    })
}

fn argmax<R: Real>(row: &[R]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub struct PretrainLossOutput {
    pub total: Tensor,
    pub node: BranchLoss,
    pub edge: BranchLoss,
}

impl PretrainLossOutput {
    pub fn total_value(&self) -> f64 {
        self.node.loss_value + self.edge.loss_value
    }
}

/// Total reconstruction loss: node-branch plus edge-branch grouped
/// cross-entropy over their masked items. `*_masked` are the masked row
/// indices of each branch's plan (packed indices for a batch).
#[allow(clippy::too_many_arguments)]
pub fn pretrain_loss<R: Real>(
    tape: &mut Tape<R>,
    node_logits: Tensor,
    node_targets: Tensor,
    node_masked: &[usize],
    edge_logits: Tensor,
    edge_targets: Tensor,
    edge_masked: &[usize],
    node_groups: &[(&'static str, FeatureGroup)],
    edge_groups: &[(&'static str, FeatureGroup)],
) -> Result<PretrainLossOutput, ModelError> {
    let node = masked_reconstruction_loss(tape, node_logits, node_targets, node_masked, node_groups)?;
    let edge = masked_reconstruction_loss(tape, edge_logits, edge_targets, edge_masked, edge_groups)?;
    let total = tape.add(node.loss, edge.loss)?;
    Ok(PretrainLossOutput { total, node, edge })
}

const PROB_EPS: f64 = 1e-12;

pub struct FinetuneLossOutput {
    pub total: Tensor,
    pub supervised: f64,
    pub disagreement: f64,
}

/// Supervised binary cross-entropy (mean over present labels, both
/// branches) plus the disagreement term: the L2 distance between the two
/// branches' predictions, averaged over molecules.
///
/// `labels` and `present` are row-major `n_mols x n_tasks`; probabilities
/// are post-sigmoid.
pub fn finetune_loss<R: Real>(
    tape: &mut Tape<R>,
    p_node: Tensor,
    p_edge: Tensor,
    labels: &[f64],
    present: &[bool],
) -> Result<FinetuneLossOutput, ModelError> {
    let shape = tape.shape(p_node).to_vec();
    let (n_mols, n_tasks) = (shape[0], shape[1]);
    assert_eq!(labels.len(), n_mols * n_tasks);
    assert_eq!(present.len(), n_mols * n_tasks);

    let n_present = present.iter().filter(|&&p| p).count();
    if n_present == 0 {
        return Err(ModelError::AllLabelsMissing);
    }

    let y = tape.constant(
        &shape,
        labels.iter().map(|&v| R::from_f64(v)).collect::<Vec<_>>(),
    );
    let w = tape.constant(
        &shape,
        present
            .iter()
            .map(|&p| if p { R::ONE } else { R::ZERO })
            .collect::<Vec<_>>(),
    );
    let ones = tape.constant(&shape, vec![R::ONE; n_mols * n_tasks]);

    let mut bce_terms = Vec::new();
    for &p in &[p_node, p_edge] {
        let pc = tape.clamp(p, R::from_f64(PROB_EPS), R::from_f64(1.0 - PROB_EPS));
        let lp = tape.ln(pc);
        let q = tape.sub(ones, pc)?;
        let lq = tape.ln(q);
        let one_minus_y = tape.sub(ones, y)?;
        let pos = tape.mul(y, lp)?;
        let neg = tape.mul(one_minus_y, lq)?;
        let ll = tape.add(pos, neg)?;
        let masked = tape.mul(ll, w)?;
        let summed = tape.sum_all(masked);
        bce_terms.push(tape.scale(summed, R::from_f64(-1.0 / n_present as f64)));
    }
    let sup = tape.add(bce_terms[0], bce_terms[1])?;

    // disagreement: per-molecule L2 over present tasks, averaged over
    // molecules that have at least one present label
    let diff = tape.sub(p_node, p_edge)?;
    let diff = tape.mul(diff, w)?;
    let sq = tape.mul(diff, diff)?;
    let col = tape.constant(&[n_tasks, 1], vec![R::ONE; n_tasks]);
    let row_sums = tape.matmul(sq, col)?; // n_mols x 1
    let norms = tape.sqrt(row_sums);
    let mol_has_label: Vec<R> = (0..n_mols)
        .map(|i| {
            if present[i * n_tasks..(i + 1) * n_tasks].iter().any(|&p| p) {
                R::ONE
            } else {
                R::ZERO
            }
        })
        .collect();
    let n_counted = mol_has_label.iter().filter(|&&x| x == R::ONE).count();
    let indicator = tape.constant(&[n_mols, 1], mol_has_label);
    let counted = tape.mul(norms, indicator)?;
    let diss_sum = tape.sum_all(counted);
    let diss = tape.scale(diss_sum, R::from_f64(1.0 / n_counted as f64));

    let total = tape.add(sup, diss)?;
    Ok(FinetuneLossOutput {
        total,
        supervised: tape.value(sup)[0].to_f64(),
        disagreement: tape.value(diss)[0].to_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::node_feature_groups;
    use crate::rng::SplitRng;

    #[test]
    fn uniform_element_logits_cost_ln10_per_masked_node() {
        let mut tape: Tape<f64> = Tape::new();
        let n = 4;
        let f = 27;
        // all-zero logits are uniform within every group
        let logits = tape.constant(&[n, f], vec![0.0; n * f]);
        let mut tdata = vec![0.0; n * f];
        for i in 0..n {
            tdata[i * f + 1] = 1.0; // element C
            tdata[i * f + 10] = 1.0; // degree 0
            tdata[i * f + 18] = 1.0; // charge 0
            tdata[i * f + 22] = 1.0; // 0 explicit H
        }
        let targets = tape.constant(&[n, f], tdata);
        let masked = [0, 2];
        let out = masked_reconstruction_loss(
            &mut tape,
            logits,
            targets,
            &masked,
            &node_feature_groups(),
        )
        .unwrap();
        // element group contributes ln(10) per masked node
        let expect_element = 2.0 * (10.0f64).ln();
        // entire loss: ln10 + ln6 + ln5 + ln2 (binary at 0 logit) + ln5 per node
        let expect_total =
            2.0 * ((10.0f64).ln() + (6.0f64).ln() + (5.0f64).ln() + (2.0f64).ln() + (5.0f64).ln());
        assert!((out.loss_value - expect_total).abs() < 1e-9);
        // the element share alone
        let mut tape2: Tape<f64> = Tape::new();
        let l2 = tape2.constant(&[n, 10], vec![0.0; n * 10]);
        let mut t2 = vec![0.0; n * 10];
        for i in 0..n {
            t2[i * 10 + 1] = 1.0;
        }
        let t2 = tape2.constant(&[n, 10], t2);
        let only_element = masked_reconstruction_loss(
            &mut tape2,
            l2,
            t2,
            &masked,
            &[("element", FeatureGroup::Categorical { lo: 0, hi: 10 })],
        )
        .unwrap();
        assert!((only_element.loss_value - expect_element).abs() < 1e-9);
    }

    #[test]
    fn visible_logits_cannot_change_loss() {
        let f = 27;
        let n = 5;
        let masked = [1, 3];
        let mut base = vec![0.25; n * f];
        let run = |logit_data: Vec<f64>| {
            let mut tape: Tape<f64> = Tape::new();
            let logits = tape.constant(&[n, f], logit_data);
            let mut tdata = vec![0.0; n * f];
            for i in 0..n {
                tdata[i * f] = 1.0;
                tdata[i * f + 11] = 1.0;
                tdata[i * f + 18] = 1.0;
                tdata[i * f + 22] = 1.0;
            }
            let targets = tape.constant(&[n, f], tdata);
            masked_reconstruction_loss(&mut tape, logits, targets, &masked, &node_feature_groups())
                .unwrap()
                .loss_value
        };
        let a = run(base.clone());
        // perturb a visible row (row 0) heavily
        for j in 0..f {
            base[j] = 1e6;
        }
        let b = run(base);
        assert_eq!(a.to_bits(), b.to_bits(), "bit-exact invariance");
    }

    #[test]
    fn perfect_logits_drive_loss_to_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let n = 3;
        let f = 27;
        let mut tdata = vec![0.0; n * f];
        for i in 0..n {
            tdata[i * f + 1] = 1.0;
            tdata[i * f + 12] = 1.0;
            tdata[i * f + 18] = 1.0;
            tdata[i * f + 21] = 1.0; // aromatic on
            tdata[i * f + 23] = 1.0;
        }
        // logits: +inf margin approximated by +-1e4 on the correct slots
        let logits_data: Vec<f64> = tdata.iter().map(|&t| if t > 0.5 { 1e4 } else { -1e4 }).collect();
        let logits = tape.constant(&[n, f], logits_data);
        let targets = tape.constant(&[n, f], tdata);
        let out = masked_reconstruction_loss(
            &mut tape,
            logits,
            targets,
            &[0, 1, 2],
            &node_feature_groups(),
        )
        .unwrap();
        assert!(out.loss_value.abs() < 1e-9, "loss {}", out.loss_value);
        for g in &out.groups {
            assert_eq!(g.correct, g.total, "{}", g.name);
        }
    }

    #[test]
    fn empty_mask_set_rejected() {
        let mut tape: Tape<f64> = Tape::new();
        let logits = tape.constant(&[2, 27], vec![0.0; 54]);
        let targets = tape.constant(&[2, 27], vec![0.0; 54]);
        assert!(matches!(
            masked_reconstruction_loss(&mut tape, logits, targets, &[], &node_feature_groups()),
            Err(ModelError::EmptyMaskSet)
        ));
    }

    #[test]
    fn equal_predictions_have_zero_disagreement() {
        let mut tape: Tape<f64> = Tape::new();
        let p = tape.constant(&[1, 2], vec![0.3, 0.8]);
        let out = finetune_loss(&mut tape, p, p, &[1.0, 0.0], &[true, true]).unwrap();
        assert_eq!(out.disagreement, 0.0);
        assert!(tape.value(out.total)[0].is_finite());
    }

    #[test]
    fn opposite_predictions_disagree_by_sqrt2() {
        let mut tape: Tape<f64> = Tape::new();
        let pn = tape.constant(&[1, 2], vec![1.0, 0.0]);
        let pe = tape.constant(&[1, 2], vec![0.0, 1.0]);
        let out = finetune_loss(&mut tape, pn, pe, &[1.0, 0.0], &[true, true]).unwrap();
        assert!((out.disagreement - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn matches_scalar_oracle() {
        let n_mols = 3;
        let n_tasks = 4;
        let mut s = SplitRng::new(5).stream();
        let pn_data: Vec<f64> = (0..12).map(|_| s.uniform(0.05, 0.95)).collect();
        let pe_data: Vec<f64> = (0..12).map(|_| s.uniform(0.05, 0.95)).collect();
        let labels: Vec<f64> = (0..12).map(|_| if s.next_f64() < 0.5 { 0.0 } else { 1.0 }).collect();
        let present: Vec<bool> = (0..12).map(|i| i != 5 && i != 10).collect();

        let mut tape: Tape<f64> = Tape::new();
        let pn = tape.constant(&[n_mols, n_tasks], pn_data.clone());
        let pe = tape.constant(&[n_mols, n_tasks], pe_data.clone());
        let out = finetune_loss(&mut tape, pn, pe, &labels, &present).unwrap();

        // independent scalar-by-scalar oracle
        let mut bce = 0.0;
        let mut n_present = 0;
        for i in 0..12 {
            if present[i] {
                n_present += 1;
                for p in [pn_data[i], pe_data[i]] {
                    bce += -(labels[i] * p.ln() + (1.0 - labels[i]) * (1.0 - p).ln());
                }
            }
        }
        bce /= n_present as f64;
        let mut diss = 0.0;
        for mol in 0..n_mols {
            let mut sq = 0.0;
            for t in 0..n_tasks {
                let i = mol * n_tasks + t;
                if present[i] {
                    sq += (pn_data[i] - pe_data[i]).powi(2);
                }
            }
            diss += sq.sqrt();
        }
        diss /= n_mols as f64;

        let got = tape.value(out.total)[0];
        assert!((got - (bce + diss)).abs() < 1e-10, "{got} vs {}", bce + diss);
    }

    #[test]
    fn all_labels_missing_rejected() {
        let mut tape: Tape<f64> = Tape::new();
        let p = tape.constant(&[1, 2], vec![0.5, 0.5]);
        assert!(matches!(
            finetune_loss(&mut tape, p, p, &[0.0, 0.0], &[false, false]),
            Err(ModelError::AllLabelsMissing)
        ));
    }
}
