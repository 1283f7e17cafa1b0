//! Stochastic training of the symbol distribution.
//!
//! The learned object is a weight vector over the constellation. Each epoch
//! re-expresses the current distribution as weights against a fresh
//! constant-composition proposal, then runs a fixed number of batches: build
//! the rate estimate on the tape, one backward sweep for the gradient, one
//! optimizer step on the weights, and a projection that restores the simplex
//! and probability-floor invariants. The epoch ends by folding the weights
//! back into a distribution, which seeds the next epoch's proposal.

pub mod graph;
pub mod optimizers;

pub use graph::{
    build_loss, draw_frozen_batch, ChannelModel, FrozenBatch, LossGraph, NoiseDraw,
    PipelineSetup,
};
pub use optimizers::{Optimizer, OptimizerConfig};

use crate::autodiff::{AdError, Tape};
use crate::demappers::DemapperError;
use crate::distribution::{
    approximate_vd, probs_from, weights_from, DistributionError, ProbabilityVector, WeightVector,
};
use crate::losses::LossError;
use crate::ExperimentRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Objective the trainer maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Symbol-metric mutual information estimate.
    Mi,
    /// Bit-metric rate estimate for a binary demapper.
    Bmi,
}

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("initial distribution has {distribution} entries, constellation has {constellation}")]
    DimensionMismatch {
        distribution: usize,
        constellation: usize,
    },
    #[error("batch size must be positive")]
    BatchSizeZero,
    #[error("square-law demapper needs at least 8 quadrature nodes, got {nodes}")]
    QuadratureTooCoarse { nodes: usize },
    #[error("square-law channel requires strictly positive real amplitudes")]
    ChannelNeedsPositiveAmplitudes,
    #[error("batch noise was drawn for a different channel kind")]
    NoiseKindMismatch,
    #[error("rate estimate became non-finite ({value}) at epoch {epoch}, batch {batch}")]
    NonFiniteRate {
        epoch: usize,
        batch: usize,
        value: f64,
    },
    #[error("weights became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteWeights { epoch: usize, batch: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Demapper(#[from] DemapperError),
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// Full description of one training run.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub setup: PipelineSetup,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub initial: ProbabilityVector,
    pub seed: u64,
    /// Independent generator stream; distinct streams under one seed give
    /// independent runs (used by parallel sweeps).
    pub stream: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    /// Value of the importance-weighted rate estimate for this batch, in
    /// bits per symbol, before the optimizer step.
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_rate: f64,
    /// Distribution after the epoch's weight update was folded back.
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingResult {
    pub distribution: ProbabilityVector,
    pub epoch_records: Vec<EpochRecord>,
    pub batch_records: Vec<BatchRecord>,
}

/// Minimum total probability mass a symbol is allowed to keep: each symbol
/// retains at least `WEIGHT_FLOOR_TOTAL / M`.
pub const WEIGHT_FLOOR_TOTAL: f64 = 1e-6;

/// Restores the running invariants after an optimizer step: every symbol
/// keeps probability at least 1e-6 / M and the weighted proposal sums to
/// one.
///
/// Two clamp-and-rescale passes. The first pass makes everything positive
/// and normalized no matter how far the step strayed; the second can then
/// only bump masses that sit within a factor 1.001 of the floor, so its
/// rescale divides by at most 1 + 1.001e-6 and the padded clamp stays
/// strictly above the floor after it.
pub fn project_weights(w: &mut [f64], q: &[f64]) {
    assert_eq!(w.len(), q.len());
    let padded_floor = 1.001 * WEIGHT_FLOOR_TOTAL / w.len() as f64;
    for _ in 0..2 {
        for (wj, &qj) in w.iter_mut().zip(q) {
            *wj = wj.max(padded_floor / qj);
        }
        let total: f64 = w.iter().zip(q).map(|(&wj, &qj)| wj * qj).sum();
        for wj in w.iter_mut() {
            *wj /= total;
        }
    }
}

/// Runs the full training loop and returns the learned distribution with
/// per-batch and per-epoch traces. Deterministic in (seed, stream).
pub fn train(config: &TrainingConfig) -> Result<TrainingResult, TrainerError> {
    let m = config.setup.constellation.size();
    if config.initial.len() != m {
        return Err(TrainerError::DimensionMismatch {
            distribution: config.initial.len(),
            constellation: m,
        });
    }
    if config.batch_size == 0 {
        return Err(TrainerError::BatchSizeZero);
    }
    if matches!(config.setup.channel, ChannelModel::Imdd(_)) && config.setup.quad_nodes < 8 {
        return Err(TrainerError::QuadratureTooCoarse {
            nodes: config.setup.quad_nodes,
        });
    }

    let mut rng = ExperimentRng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);
    let mut optimizer = config.optimizer.build(m);
    let tape = Tape::new();
    let mut p = config.initial.clone();
    let mut epoch_records = Vec::with_capacity(config.epochs);
    let mut batch_records = Vec::with_capacity(config.epochs * config.batches_per_epoch);

    for epoch in 0..config.epochs {
        let composition = approximate_vd(&p, config.batch_size)?;
        let q = composition.probabilities();
        let mut w = weights_from(&p, &q)?.as_slice().to_vec();
        project_weights(&mut w, &q);
        optimizer.reset(&w);
        let mut rate_sum = 0.0;
        for batch in 0..config.batches_per_epoch {
            let draw = draw_frozen_batch(&composition, &config.setup.channel, &mut rng);
            tape.clear();
            let built = build_loss(&tape, &config.setup, &w, &q, composition.counts(), &draw)?;
            let rate = built.loss.value();
            if !rate.is_finite() {
                return Err(TrainerError::NonFiniteRate {
                    epoch,
                    batch,
                    value: rate,
                });
            }
            let grads = tape.backward(built.loss)?;
            // The optimizer minimizes; the estimate is maximized.
            let descent: Vec<f64> = built
                .weight_leaves
                .iter()
                .map(|&leaf| -grads.wrt(leaf))
                .collect();
            optimizer.step(&mut w, &descent);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(TrainerError::NonFiniteWeights { epoch, batch });
            }
            project_weights(&mut w, &q);
            rate_sum += rate;
            batch_records.push(BatchRecord { epoch, batch, rate });
        }
        p = probs_from(&WeightVector::new(w)?, &q)?;
        epoch_records.push(EpochRecord {
            epoch,
            mean_rate: rate_sum / (config.batches_per_epoch.max(1)) as f64,
            distribution: p.as_slice().to_vec(),
        });
    }

    Ok(TrainingResult {
        distribution: p,
        epoch_records,
        batch_records,
    })
}
