//! First-order update rules. Both descend: callers maximizing an objective
//! feed the gradient of its negation.

use serde::{Deserialize, Serialize};

use crate::error::{AutodiffError, Result};
use crate::params::{Gradients, ParamSet};

pub trait Optimizer {
    fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()>;
}

/// `v ← ρv + (1-ρ)g²`, `θ ← θ - μ g / (√v + ε)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    #[serde(skip)]
    mean_square: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(learning_rate: f64) -> Self {
        Self::with_hyper(learning_rate, 0.9, 1e-8)
    }

    pub fn with_hyper(learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            mean_square: Vec::new(),
        }
    }

    /// Running averages of squared gradients, one buffer per parameter.
    pub fn mean_square(&self) -> &[Vec<f64>] {
        &self.mean_square
    }
}

impl Optimizer for RmsProp {
    fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        check(params, grads)?;
        if self.mean_square.is_empty() {
            self.mean_square = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        }
        let (lr, rho, eps) = (self.learning_rate, self.decay, self.epsilon);
        for id in params.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            let v = &mut self.mean_square[id.index()];
            for ((theta, gi), vi) in params.get_mut(id).data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = rho * *vi + (1.0 - rho) * gi * gi;
                *theta -= lr * gi / (vi.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    #[serde(skip)]
    steps: u64,
    #[serde(skip)]
    first: Vec<Vec<f64>>,
    #[serde(skip)]
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self::with_hyper(learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        check(params, grads)?;
        if self.first.is_empty() {
            self.first = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
            self.second = self.first.clone();
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (lr, b1, b2, eps) = (self.learning_rate, self.beta1, self.beta2, self.epsilon);
        for id in params.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            let m = &mut self.first[id.index()];
            let v = &mut self.second[id.index()];
            let theta = params.get_mut(id).data_mut();
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

fn check(params: &ParamSet, grads: &Gradients) -> Result<()> {
    grads.check_matches(params)?;
    if !grads.is_finite() {
        return Err(AutodiffError::NonFinite("gradient".into()));
    }
    Ok(())
}
