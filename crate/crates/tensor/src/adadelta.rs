use crate::params::{Gradients, Group, ParamStore};
use crate::{Result, TensorError};

/// AdaDelta with a per-group learning-rate multiplier.
///
/// ```text
/// E[g²]  ← ρ·E[g²]  + (1−ρ)·g²
/// Δ      = √(E[Δ²]+ε) / √(E[g²]+ε) · g
/// E[Δ²]  ← ρ·E[Δ²]  + (1−ρ)·Δ²
/// x      ← x − lr_group · Δ
/// ```
#[derive(Debug, Clone)]
pub struct AdaDelta {
    pub rho: f64,
    pub eps: f64,
    pub lr_composer: f64,
    pub lr_solver: f64,
    sq_grad: Vec<Vec<f64>>,
    sq_delta: Vec<Vec<f64>>,
}

impl AdaDelta {
    pub fn new(store: &ParamStore, rho: f64, eps: f64, lr_composer: f64, lr_solver: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.value(id).len()]).collect();
        AdaDelta {
            rho,
            eps,
            lr_composer,
            lr_solver,
            sq_grad: zeros.clone(),
            sq_delta: zeros,
        }
    }

    pub fn lr(&self, group: Group) -> f64 {
        match group {
            Group::Composer => self.lr_composer,
            Group::Solver => self.lr_solver,
        }
    }

    /// Apply one update for every parameter that has a gradient, then clear
    /// `grads`. Parameters never reached by the loss are left untouched,
    /// accumulators included.
    pub fn step(&mut self, store: &mut ParamStore, grads: &mut Gradients) -> Result<()> {
        if grads.len() != store.len() || self.sq_grad.len() != store.len() {
            return Err(TensorError::Contract(format!(
                "optimizer built for {} params, store has {}, gradients {}",
                self.sq_grad.len(),
                store.len(),
                grads.len()
            )));
        }
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let Some(g) = grads.take(id) else { continue };
            let lr = self.lr(store.group(id));
            let value = store.value_mut(id).data_mut();
            if g.len() != value.len() {
                return Err(TensorError::Contract(format!(
                    "gradient for `{}` has {} values, parameter has {}",
                    id.index(),
                    g.len(),
                    value.len()
                )));
            }
            let eg = &mut self.sq_grad[id.index()];
            let ed = &mut self.sq_delta[id.index()];
            for i in 0..g.len() {
                eg[i] = self.rho * eg[i] + (1.0 - self.rho) * g[i] * g[i];
                let delta = (ed[i] + self.eps).sqrt() / (eg[i] + self.eps).sqrt() * g[i];
                ed[i] = self.rho * ed[i] + (1.0 - self.rho) * delta * delta;
                value[i] -= lr * delta;
            }
        }
        grads.zero();
        Ok(())
    }

    /// Squared-gradient and squared-update accumulators of one parameter.
    pub fn accumulators(&self, index: usize) -> (&[f64], &[f64]) {
        (&self.sq_grad[index], &self.sq_delta[index])
    }
}
