//! Central-difference gradient checking. Only meaningful in 64-bit mode;
//! 32-bit finite differences are dominated by rounding noise.

use alloc::vec::Vec;

use super::{Tape, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub n_coords: usize,
    pub n_failed: usize,
    pub max_rel_err: f64,
    pub tol: f64,
    /// Per-coordinate relative error between analytic and numeric gradients.
    pub rel_errors: Vec<f64>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.n_failed == 0
    }

    /// Fraction of coordinates within tolerance.
    pub fn pass_fraction(&self) -> f64 {
        if self.n_coords == 0 {
            return 1.0;
        }
        (self.n_coords - self.n_failed) as f64 / self.n_coords as f64
    }
}

/// Compare the analytic gradient of a scalar-valued tensor function against
/// central differences at `point`.
///
/// The relative error for a coordinate is `|a - n| / max(1, |a|, |n|)`, so
/// near-zero gradients are compared absolutely.
pub fn grad_check<F>(
    f: F,
    shape: &[usize],
    point: &[f64],
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape<f64>, Tensor) -> Result<Tensor, TensorError>,
{
    let eval = |data: &[f64]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let x = tape.leaf(shape, data.to_vec());
        let out = f(&mut tape, x)?;
        if tape.value(out).len() != 1 {
            return Err(TensorError::NonScalarLoss);
        }
        Ok(tape.value(out)[0])
    };

    // analytic gradient
    let mut tape = Tape::new();
    let x = tape.leaf(shape, point.to_vec());
    let out = f(&mut tape, x)?;
    if tape.value(out).len() != 1 {
        return Err(TensorError::NonScalarLoss);
    }
    tape.backward(out)?;
    let analytic = tape.grad(x).expect("leaf gradient").to_vec();

    let mut rel_errors = Vec::with_capacity(point.len());
    let mut n_failed = 0;
    let mut max_rel_err: f64 = 0.0;
    let mut perturbed = point.to_vec();
    for i in 0..point.len() {
        let h = eps * libm::fmax(1.0, libm::fabs(point[i]));
        perturbed[i] = point[i] + h;
        let fp = eval(&perturbed)?;
        perturbed[i] = point[i] - h;
        let fm = eval(&perturbed)?;
        perturbed[i] = point[i];
        let numeric = (fp - fm) / (2.0 * h);

        let denom = libm::fmax(1.0, libm::fmax(libm::fabs(analytic[i]), libm::fabs(numeric)));
        let rel = libm::fabs(analytic[i] - numeric) / denom;
        if rel > tol {
            n_failed += 1;
        }
        if rel > max_rel_err {
            max_rel_err = rel;
        }
        rel_errors.push(rel);
    }

    Ok(GradCheckReport {
        n_coords: point.len(),
        n_failed,
        max_rel_err,
        tol,
        rel_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitRng;
    use alloc::vec;

    #[test]
    fn sum_of_squares_is_tight() {
        let mut s = SplitRng::new(11).stream();
        let point: Vec<f64> = (0..8).map(|_| s.uniform(-1.0, 1.0)).collect();
        let report = grad_check(
            |t, x| {
                let sq = t.mul(x, x)?;
                Ok(t.sum_all(sq))
            },
            &[8],
            &point,
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.max_rel_err <= 1e-8, "err {}", report.max_rel_err);
    }

    #[test]
    fn layer_norm_chain_passes() {
        let mut s = SplitRng::new(12).stream();
        let point: Vec<f64> = (0..12).map(|_| s.uniform(-2.0, 2.0)).collect();
        let report = grad_check(
            |t, x| {
                let gamma = t.constant(&[4], vec![1.3, 0.7, -0.4, 1.0]);
                let beta = t.constant(&[4], vec![0.1, -0.2, 0.0, 0.5]);
                let m = t.reshape(x, &[3, 4])?;
                let y = t.layer_norm(m, gamma, beta)?;
                Ok(t.sum_all(y))
            },
            &[12],
            &point,
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "max err {}", report.max_rel_err);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let report = grad_check(
            |t, x| {
                let zero = t.scale(x, 0.0);
                Ok(t.sum_all(zero))
            },
            &[4],
            &[1.0, -2.0, 3.0, 4.0],
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.max_rel_err < 1e-12);
    }

    #[test]
    fn cross_entropy_chain_matches_finite_difference() {
        // softmax cross-entropy against a fixed one-hot target
        let mut s = SplitRng::new(13).stream();
        let point: Vec<f64> = (0..10).map(|_| s.uniform(-1.5, 1.5)).collect();
        let report = grad_check(
            |t, x| {
                let logits = t.reshape(x, &[2, 5])?;
                let target = t.constant(
                    &[2, 5],
                    vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                );
                let lse = t.logsumexp_rows(logits)?;
                let lse_sum = t.sum_all(lse);
                let picked = t.mul(logits, target)?;
                let picked_sum = t.sum_all(picked);
                t.sub(lse_sum, picked_sum)
            },
            &[10],
            &point,
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "max err {}", report.max_rel_err);
    }

    #[test]
    fn non_scalar_function_rejected() {
        let res = grad_check(|_t, x| Ok(x), &[3], &[1.0, 2.0, 3.0], 1e-6, 1e-6);
        assert!(matches!(res, Err(TensorError::NonScalarLoss)));
    }
}
