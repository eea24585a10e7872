//! SGD with momentum, L2 weight decay and per-epoch learning-rate decay.

use crate::autograd::ParamStore;
use crate::error::{ensure, Result};
use crate::tensor::Real;

#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    pub base_learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Per-epoch decay: `lr(e) = lr₀ / (1 + lr_decay·e)`.
    pub lr_decay: f64,
    learning_rate: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64, lr_decay: f64) -> Self {
        OptimizerState {
            base_learning_rate: learning_rate,
            momentum,
            weight_decay,
            lr_decay,
            learning_rate,
            velocity: Vec::new(),
        }
    }

    /// lr 0.001, momentum 0.9, weight decay 0.0005, lr decay 1e-4.
    pub fn reference_defaults() -> Self {
        Self::new(0.001, 0.9, 0.0005, 1e-4)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.learning_rate = self.base_learning_rate / (1.0 + self.lr_decay * epoch as f64);
    }

    pub fn velocity(&self, index: usize) -> Option<&[T]> {
        self.velocity.get(index).map(Vec::as_slice)
    }
}

/// `v ← μ·v + (g + λ·w)`, `w ← w − η·v`, then clears every gradient slot.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, state: &mut OptimizerState<T>) -> Result<()> {
    if state.velocity.is_empty() {
        state.velocity = params
            .iter()
            .map(|(_, p)| vec![T::zero(); p.tensor.len()])
            .collect();
    }
    ensure!(
        state.velocity.len() == params.len(),
        "optimizer state tracks {} parameters, store has {}",
        state.velocity.len(),
        params.len()
    );
    for p in params.iter_mut() {
        ensure!(
            p.tensor.grad().is_some(),
            "parameter {:?} has no gradient; run backward first",
            p.name
        );
    }
    let mu = T::from_f64_lossy(state.momentum);
    let lambda = T::from_f64_lossy(state.weight_decay);
    let eta = T::from_f64_lossy(state.learning_rate);
    for (p, v) in params.iter_mut().zip(state.velocity.iter_mut()) {
        let (w, g) = p.tensor.data_and_grad_mut();
        let g = g.expect("checked above");
        for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi + (gi + lambda * *wi);
            *wi -= eta * *vi;
        }
    }
    params.clear_grads();
    Ok(())
}
