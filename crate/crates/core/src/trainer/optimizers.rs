//! First-order optimizers over the weight vector.
//!
//! All optimizers use the minimization convention: `step` moves against the
//! supplied gradient. The trainer maximizes its rate estimate by passing the
//! negated ascent gradient.
//!
//! State is reset at every epoch boundary because the weights themselves are
//! rebuilt there (the learned distribution is re-expressed against a fresh
//! proposal), which invalidates any history the optimizer has accumulated
//! about the old coordinates.

use serde::{Deserialize, Serialize};

pub trait Optimizer: Send {
    /// Clears accumulated state and re-anchors at `x`.
    fn reset(&mut self, x: &[f64]);
    /// One update of `x` in place, given the gradient at `x`.
    fn step(&mut self, x: &mut [f64], grad: &[f64]);
}

/// Construction-time choice of optimizer, deserializable from run configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerConfig {
    /// Coin-betting optimizer: per-coordinate, no learning rate. `alpha`
    /// caps how aggressively early bets scale (larger is more cautious).
    Cocob {
        #[serde(default = "default_cocob_alpha")]
        alpha: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    Sgd { lr: f64 },
}

fn default_cocob_alpha() -> f64 {
    100.0
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Cocob {
            alpha: default_cocob_alpha(),
        }
    }
}

impl OptimizerConfig {
    pub fn build(&self, dim: usize) -> Box<dyn Optimizer + Send> {
        match *self {
            OptimizerConfig::Cocob { alpha } => Box::new(Cocob::new(dim, alpha)),
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            } => Box::new(Adam::new(dim, lr, beta1, beta2, epsilon)),
            OptimizerConfig::Sgd { lr } => Box::new(Sgd { lr }),
        }
    }
}

/// Per-coordinate coin-betting optimizer.
///
/// Each coordinate maintains a betting fraction derived from accumulated
/// (negative) gradients and a running reward; the position is always the
/// anchor plus the current bet, so it adapts its own step scale with no
/// learning rate. The `alpha` guard keeps the very first bets small until
/// enough gradient mass has been seen.
pub struct Cocob {
    alpha: f64,
    initial_scale: f64,
    anchor: Vec<f64>,
    scale: Vec<f64>,
    grad_abs_sum: Vec<f64>,
    reward: Vec<f64>,
    bet_sum: Vec<f64>,
}

impl Cocob {
    pub fn new(dim: usize, alpha: f64) -> Self {
        assert!(alpha >= 1.0, "alpha must be at least 1");
        let initial_scale = 1e-8;
        Cocob {
            alpha,
            initial_scale,
            anchor: vec![0.0; dim],
            scale: vec![initial_scale; dim],
            grad_abs_sum: vec![0.0; dim],
            reward: vec![0.0; dim],
            bet_sum: vec![0.0; dim],
        }
    }
}

impl Optimizer for Cocob {
    fn reset(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.anchor.len(), "dimension changed");
        self.anchor.copy_from_slice(x);
        self.scale.fill(self.initial_scale);
        self.grad_abs_sum.fill(0.0);
        self.reward.fill(0.0);
        self.bet_sum.fill(0.0);
    }

    fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        assert_eq!(x.len(), self.anchor.len(), "dimension changed");
        assert_eq!(x.len(), grad.len());
        for i in 0..x.len() {
            let g = grad[i];
            self.scale[i] = self.scale[i].max(g.abs());
            self.grad_abs_sum[i] += g.abs();
            self.reward[i] = (self.reward[i] - (x[i] - self.anchor[i]) * g).max(0.0);
            self.bet_sum[i] -= g;
            let l = self.scale[i];
            let denom = l * (self.grad_abs_sum[i] + l).max(self.alpha * l);
            x[i] = self.anchor[i] + self.bet_sum[i] / denom * (l + self.reward[i]);
        }
    }
}

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(dim: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!(lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }
}

impl Optimizer for Adam {
    fn reset(&mut self, _x: &[f64]) {
        self.t = 0;
        self.m.fill(0.0);
        self.v.fill(0.0);
    }

    fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        assert_eq!(x.len(), self.m.len(), "dimension changed");
        assert_eq!(x.len(), grad.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            x[i] -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
        }
    }
}

pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn reset(&mut self, _x: &[f64]) {}

    fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        assert_eq!(x.len(), grad.len());
        for i in 0..x.len() {
            x[i] -= self.lr * grad[i];
        }
    }
}
