//! ROC-AUC via the Mann-Whitney rank statistic; ties contribute one half.

use alloc::vec;
use alloc::vec::Vec;

use super::TrainError;

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, TrainError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(TrainError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // average ranks over tie groups (1-based)
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }

    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter_map(|(&l, &r)| l.then_some(r))
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Exhaustive pair-counting oracle: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting one half. Quadratic; test use.
pub fn roc_auc_pair_oracle(scores: &[f64], labels: &[bool]) -> Result<f64, TrainError> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter_map(|(&s, &l)| l.then_some(s))
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter_map(|(&s, &l)| (!l).then_some(s))
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(TrainError::SingleClass);
    }
    let mut total = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                total += 1.0;
            } else if p == n {
                total += 0.5;
            }
        }
    }
    Ok(total / (pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitRng;

    #[test]
    fn perfectly_separated_is_one() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, false, true];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn worked_example_three_quarters() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [false, false, true, true];
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((auc - 0.75).abs() < 1e-12);
        assert_eq!(auc, roc_auc_pair_oracle(&scores, &labels).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(TrainError::SingleClass)
        ));
    }

    #[test]
    fn matches_pair_oracle_on_random_instances() {
        let mut s = SplitRng::new(77).stream();
        for case in 0..200 {
            let n = 2 + (s.below(48) as usize);
            // quantized scores so ties actually occur
            let scores: Vec<f64> = (0..n).map(|_| (s.below(10) as f64) / 10.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| s.next_f64() < 0.5).collect();
            labels[0] = true;
            if n > 1 {
                labels[1] = false;
            }
            let fast = roc_auc(&scores, &labels).unwrap();
            let slow = roc_auc_pair_oracle(&scores, &labels).unwrap();
            assert!((fast - slow).abs() < 1e-12, "case {case}: {fast} vs {slow}");
        }
    }
}
