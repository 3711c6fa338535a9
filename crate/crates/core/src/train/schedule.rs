//! Noam learning-rate schedule: linear warmup then inverse square-root
//! decay, scaled by the inverse square root of the hidden size.

use super::TrainError;

pub fn noam_lr(step: u64, d: usize, warmup: u64) -> Result<f64, TrainError> {
    if step == 0 {
        return Err(TrainError::NonPositiveStep);
    }
    let s = step as f64;
    let w = warmup as f64;
    let ramp = s * libm::pow(w, -1.5);
    let decay = libm::pow(s, -0.5);
    Ok(libm::pow(d as f64, -0.5) * libm::fmin(decay, ramp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_at_warmup() {
        let w = 400;
        let at = noam_lr(w, 64, w).unwrap();
        let expect = libm::pow(64.0, -0.5) * libm::pow(w as f64, -0.5);
        assert!((at - expect).abs() < 1e-15);
        // both branches agree at the corner
        let before = noam_lr(w - 1, 64, w).unwrap();
        let after = noam_lr(w + 1, 64, w).unwrap();
        assert!(before < at && after < at);
    }

    #[test]
    fn linear_during_warmup() {
        let a = noam_lr(10, 100, 4000).unwrap();
        let b = noam_lr(20, 100, 4000).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_value() {
        // d = 100, warmup = 4000, step = 4000
        let lr = noam_lr(4000, 100, 4000).unwrap();
        assert!((lr - 1.5811e-3).abs() < 1e-6, "lr {lr}");
        assert!((lr - 0.1 * libm::pow(4000.0, -0.5)).abs() < 1e-15);
    }

    #[test]
    fn zero_step_rejected() {
        assert!(matches!(noam_lr(0, 100, 4000), Err(TrainError::NonPositiveStep)));
    }
}
