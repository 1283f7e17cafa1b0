//! Checks that the analytic weight-gradients of the training loss equal
//! finite differences of the very same frozen computation. Noise and
//! composition are drawn once and reused for every evaluation, so the only
//! thing that moves between evaluations is the weight vector; any
//! disagreement beyond rounding is a real defect in the graph or the
//! backward sweep.

use super::ValidationError;
use crate::autodiff::Tape;
use crate::distribution::{approximate_vd, weights_from, ProbabilityVector};
use crate::trainer::{build_loss, draw_frozen_batch, PipelineSetup};
use crate::ExperimentRng;
use rand::SeedableRng;

/// Analytic and finite-difference gradients of the batch rate with respect
/// to the target probabilities, and their largest relative disagreement.
#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    pub autodiff: Vec<f64>,
    pub finite_diff: Vec<f64>,
    pub max_rel_error: f64,
}

/// Freezes one batch (composition and noise) for the given setup and
/// target distribution, then compares the backward-sweep gradient --
/// converted from weight space to probability space by 1/q_m -- against
/// central finite differences of step `h` applied to the probabilities
/// through the full pipeline. Off-simplex perturbed points are fine: the
/// loss is defined for any positive weights.
pub fn gradient_exactness_check(
    setup: &PipelineSetup,
    p: &ProbabilityVector,
    batch_size: usize,
    seed: u64,
    h: f64,
) -> Result<GradientCheckReport, ValidationError> {
    assert!(h > 0.0 && h.is_finite());
    let composition = approximate_vd(p, batch_size)?;
    let q = composition.probabilities();
    let w0 = weights_from(p, &q)?;
    let mut rng = ExperimentRng::seed_from_u64(seed);
    let batch = draw_frozen_batch(&composition, &setup.channel, &mut rng);

    let evaluate = |w: &[f64]| -> Result<f64, ValidationError> {
        let tape = Tape::new();
        let graph = build_loss(&tape, setup, w, &q, composition.counts(), &batch)?;
        Ok(graph.loss.value())
    };

    let tape = Tape::new();
    let graph = build_loss(&tape, setup, w0.as_slice(), &q, composition.counts(), &batch)?;
    let grads = tape.backward(graph.loss).map_err(crate::trainer::TrainerError::from)?;
    let autodiff: Vec<f64> = graph
        .weight_leaves
        .iter()
        .zip(&q)
        .map(|(&leaf, &qm)| grads.wrt(leaf) / qm)
        .collect();

    let mut finite_diff = Vec::with_capacity(q.len());
    for m in 0..q.len() {
        let mut plus = w0.as_slice().to_vec();
        plus[m] += h / q[m];
        let mut minus = w0.as_slice().to_vec();
        minus[m] -= h / q[m];
        finite_diff.push((evaluate(&plus)? - evaluate(&minus)?) / (2.0 * h));
    }

    let max_rel_error = autodiff
        .iter()
        .zip(&finite_diff)
        .map(|(&ad, &fd)| (ad - fd).abs() / fd.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(GradientCheckReport {
        autodiff,
        finite_diff,
        max_rel_error,
    })
}
