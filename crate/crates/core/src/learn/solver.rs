//! Momentum SGD with weight decay and learning-rate schedules.

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::real::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Fixed,
    /// `lr · (1 + gamma·iter)^(−power)`
    Inv {
        gamma: f64,
        power: f64,
    },
    /// `lr · gamma^⌊iter / step⌋`
    Step {
        gamma: f64,
        step: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub lr_schedule: LrSchedule,
    /// Test accuracy is logged every this many iterations (0 disables).
    pub test_interval: usize,
    /// Set from the run seed rather than read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            learning_rate: 0.00025,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 64,
            max_iterations: 5000,
            lr_schedule: LrSchedule::Inv {
                gamma: 1e-4,
                power: 0.75,
            },
            test_interval: 500,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be non-negative".into()));
        }
        if !(self.momentum.is_finite() && self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "momentum and weight_decay must be finite".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Learning rate at iteration `iter` (0-based).
    pub fn rate(&self, iter: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Fixed => self.learning_rate,
            LrSchedule::Inv { gamma, power } => self.learning_rate * (1.0 + gamma * iter as f64).powf(-power),
            LrSchedule::Step { gamma, step } => self.learning_rate * gamma.powi((iter / step.max(1)) as i32),
        }
    }
}

/// Velocity buffer. Update: `v ← μ·v + lr·(g + λ·w)`, `w ← w − v`.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    velocity: Vec<T>,
}

impl<T: Real> Sgd<T> {
    pub fn new(n_params: usize) -> Self {
        Sgd {
            velocity: vec![T::zero(); n_params],
        }
    }

    pub fn apply(&mut self, net: &mut Network<T>, grad: &[T], solver: &SolverConfig, iter: usize) {
        let lr = T::from_f64(solver.rate(iter));
        let mu = T::from_f64(solver.momentum);
        let wd = T::from_f64(solver.weight_decay);
        for ((w, v), g) in net.params_mut().iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = mu * *v + lr * (*g + wd * *w);
            *w = *w - *v;
        }
    }
}

/// One forward/backward pass and parameter update; returns the batch loss.
pub fn backward_step<T: Real>(
    net: &mut Network<T>,
    sgd: &mut Sgd<T>,
    batch: &[T],
    labels: &[u8],
    solver: &SolverConfig,
    iter: usize,
) -> Result<f64> {
    let (loss, grad) = net.loss_and_grad(batch, labels)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence(iter));
    }
    sgd.apply(net, &grad, solver, iter);
    Ok(loss)
}
