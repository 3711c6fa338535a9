//! Seeded random dataset splitting at fixed ratios.

use alloc::format;
use alloc::vec::Vec;

use super::TrainError;
use crate::rng::SplitRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    /// The 8:1:1 split used throughout.
    pub fn standard(seed: u64) -> Self {
        SplitSpec {
            ratios: (0.8, 0.1, 0.1),
            seed,
        }
    }
}

/// Shuffle 0..n with the split seed, then cut at the cumulative ratios.
/// Partitions are disjoint and exhaustive.
pub fn split_dataset(
    n: usize,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), TrainError> {
    if n < 3 {
        return Err(TrainError::TooFewItems { n });
    }
    let (r1, r2, r3) = spec.ratios;
    let sum = r1 + r2 + r3;
    if libm::fabs(sum - 1.0) > 1e-9 || r1 <= 0.0 || r2 <= 0.0 || r3 <= 0.0 {
        return Err(TrainError::ShapeMismatch(format!(
            "split ratios {r1}:{r2}:{r3} must be positive and sum to 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitRng::new(spec.seed)
        .derive("split")
        .stream()
        .shuffle(&mut order);
    let cut1 = libm::floor(r1 * n as f64) as usize;
    let cut2 = libm::floor((r1 + r2) * n as f64) as usize;
    let train = order[..cut1].to_vec();
    let valid = order[cut1..cut2].to_vec();
    let test = order[cut2..].to_vec();
    Ok((train, valid, test))
}
