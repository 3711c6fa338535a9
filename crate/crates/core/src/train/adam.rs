//! Adam with bias correction, plus global-norm gradient clipping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::TrainError;
use crate::model::ParamStore;
use crate::real::Real;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment buffers mirroring a parameter store's shapes.
#[derive(Debug, Clone)]
pub struct AdamState<R: Real> {
    pub m: Vec<Vec<R>>,
    pub v: Vec<Vec<R>>,
    pub step: u64,
}

impl<R: Real> AdamState<R> {
    pub fn new(store: &ParamStore<R>) -> Self {
        AdamState {
            m: store.entries().iter().map(|e| vec![R::ZERO; e.data.len()]).collect(),
            v: store.entries().iter().map(|e| vec![R::ZERO; e.data.len()]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update over every entry of the store.
pub fn adam_step<R: Real>(
    store: &mut ParamStore<R>,
    grads: &[Vec<R>],
    state: &mut AdamState<R>,
    lr: f64,
) -> Result<(), TrainError> {
    if grads.len() != store.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} gradient arrays for {} parameters",
            grads.len(),
            store.len()
        )));
    }
    state.step += 1;
    let t = state.step;
    let b1 = R::from_f64(BETA1);
    let b2 = R::from_f64(BETA2);
    let eps = R::from_f64(ADAM_EPS);
    let corr1 = R::from_f64(1.0 - libm::pow(BETA1, t as f64));
    let corr2 = R::from_f64(1.0 - libm::pow(BETA2, t as f64));
    let lr_r = R::from_f64(lr);

    for (i, entry) in store.entries_mut().iter_mut().enumerate() {
        let g = &grads[i];
        if g.len() != entry.data.len() {
            return Err(TrainError::ShapeMismatch(format!(
                "gradient length {} for parameter {} of length {}",
                g.len(),
                entry.name,
                entry.data.len()
            )));
        }
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (R::ONE - b1) * g[j];
            v[j] = b2 * v[j] + (R::ONE - b2) * g[j] * g[j];
            let m_hat = m[j] / corr1;
            let v_hat = v[j] / corr2;
            entry.data[j] -= lr_r * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Scale all gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<R: Real>(grads: &mut [Vec<R>], max_norm: f64) -> f64 {
    let mut sq = 0.0f64;
    for g in grads.iter() {
        for &x in g {
            let xf = x.to_f64();
            sq += xf * xf;
        }
    }
    let norm = libm::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let scale = R::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}
