//! Builds one batch's rate estimate on the autodiff tape.
//!
//! The recorded graph runs from the weight leaves all the way to the scalar
//! estimate: weights combine with the proposal into the working
//! distribution, the distribution sets the demapper priors and (under an
//! average-power constraint) the constellation scale, samples pass through
//! the channel with frozen noise, and the matched demapper posteriors feed
//! the importance-weighted estimate. One backward sweep then yields the
//! exact gradient of the estimate with respect to every weight.

use crate::autodiff::{AdError, ComplexVar, Tape, Var};
use crate::channels::{
    awgn_transmit_with, draw_awgn_noise, draw_imdd_noise, imdd_transmit_with, AwgnParams,
    ImddParams,
};
use crate::constellation::{Constellation, NormConstraint};
use crate::demappers::{awgn_log2_posteriors, imdd_log2_posteriors, TapePosteriors};
use crate::distribution::TypeApproximation;
use crate::losses::{bmi_importance, mi_importance};
use crate::trainer::{Metric, TrainerError};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Channel the pipeline trains against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelModel {
    Awgn(AwgnParams),
    Imdd(ImddParams),
}

/// Everything about the pipeline that stays fixed across batches.
#[derive(Debug, Clone)]
pub struct PipelineSetup {
    pub channel: ChannelModel,
    pub constellation: Constellation,
    pub constraint: NormConstraint,
    pub metric: Metric,
    /// Quadrature resolution of the square-law demapper; unused for AWGN.
    pub quad_nodes: usize,
}

/// One batch's random draw, kept so a graph can be rebuilt bit for bit
/// (finite-difference checks rebuild the same batch at perturbed weights).
#[derive(Debug, Clone)]
pub struct FrozenBatch {
    pub indices: Vec<usize>,
    pub noise: NoiseDraw,
}

#[derive(Debug, Clone)]
pub enum NoiseDraw {
    Awgn(Vec<Complex64>),
    Imdd(Vec<(f64, f64)>),
}

/// Draws the constant-composition symbol sequence and the channel noise for
/// one batch.
pub fn draw_frozen_batch<R: Rng>(
    composition: &TypeApproximation,
    channel: &ChannelModel,
    rng: &mut R,
) -> FrozenBatch {
    let indices = crate::distribution::draw_batch(composition, rng);
    let noise = match channel {
        ChannelModel::Awgn(params) => {
            NoiseDraw::Awgn(draw_awgn_noise(indices.len(), params.sigma2_total(), rng))
        }
        ChannelModel::Imdd(params) => {
            NoiseDraw::Imdd(draw_imdd_noise(indices.len(), params, rng))
        }
    };
    FrozenBatch { indices, noise }
}

/// The recorded estimate and the weight leaves it depends on.
pub struct LossGraph<'t> {
    pub loss: Var<'t>,
    pub weight_leaves: Vec<Var<'t>>,
}

/// Records the full batch graph on `tape` and returns the scalar estimate.
///
/// `proposal` must be the probabilities of the composition that produced
/// `batch` (counts / batch size), and `weight_values` the current weights.
pub fn build_loss<'t>(
    tape: &'t Tape,
    setup: &PipelineSetup,
    weight_values: &[f64],
    proposal: &[f64],
    counts: &[usize],
    batch: &FrozenBatch,
) -> Result<LossGraph<'t>, TrainerError> {
    let m = setup.constellation.size();
    assert_eq!(weight_values.len(), m);
    assert_eq!(proposal.len(), m);

    // Weight leaves and the working distribution p_j = w_j q_j / z. The
    // normalizer is recorded on the tape even though projection keeps it at
    // one, so its gradient contribution is never silently dropped.
    let weight_leaves: Vec<Var<'t>> = weight_values
        .iter()
        .map(|&w| tape.lift(w))
        .collect::<Result<_, _>>()?;
    let masses: Vec<Var<'t>> = weight_leaves
        .iter()
        .zip(proposal)
        .map(|(&w, &q)| w * q)
        .collect();
    let z = tape.sum(&masses)?;
    let ln_z = z.ln()?;
    let ln_priors: Vec<Var<'t>> = masses
        .iter()
        .map(|&pq| Ok(pq.ln()? - ln_z))
        .collect::<Result<_, AdError>>()?;

    // Scale. Under an average-power constraint the scale depends on the
    // working distribution and is recorded on the tape; otherwise it is a
    // constant.
    let inv_scale: Option<Var<'t>> = match setup.constraint {
        NormConstraint::AveragePower => {
            let energy_terms: Vec<Var<'t>> = masses
                .iter()
                .zip(setup.constellation.points())
                .map(|(&pq, c)| pq * c.norm_sqr())
                .collect();
            let energy = tape.sum(&energy_terms)? / z;
            Some(1.0 / energy.sqrt()?)
        }
        NormConstraint::PeakPower => None,
        NormConstraint::None => None,
    };
    let const_scale = match setup.constraint {
        NormConstraint::PeakPower => {
            let peak = setup
                .constellation
                .points()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            1.0 / peak
        }
        _ => 1.0,
    };

    let labels_opt = match setup.metric {
        Metric::Mi => None,
        Metric::Bmi => Some((
            setup.constellation.labels(),
            setup.constellation.bits_per_symbol(),
        )),
    };

    let posteriors: TapePosteriors<'t> = match (&setup.channel, &batch.noise) {
        (ChannelModel::Awgn(params), NoiseDraw::Awgn(noise)) => {
            let ctilde: Vec<ComplexVar<'t>> = match inv_scale {
                Some(inv) => setup
                    .constellation
                    .points()
                    .iter()
                    .map(|c| ComplexVar {
                        re: inv * c.re,
                        im: inv * c.im,
                    })
                    .collect(),
                None => setup
                    .constellation
                    .points()
                    .iter()
                    .map(|c| {
                        Ok(ComplexVar {
                            re: tape.lift(c.re * const_scale)?,
                            im: tape.lift(c.im * const_scale)?,
                        })
                    })
                    .collect::<Result<_, AdError>>()?,
            };
            let x: Vec<ComplexVar<'t>> =
                batch.indices.iter().map(|&i| ctilde[i]).collect();
            let y = awgn_transmit_with(&x, noise);
            awgn_log2_posteriors(
                tape,
                &y,
                &ctilde,
                &ln_priors,
                params.sigma2_total(),
                &batch.indices,
                labels_opt,
            )?
        }
        (ChannelModel::Imdd(params), NoiseDraw::Imdd(noise)) => {
            if !setup.constellation.is_positive_real() {
                return Err(TrainerError::ChannelNeedsPositiveAmplitudes);
            }
            let xtilde: Vec<Var<'t>> = match inv_scale {
                Some(inv) => setup
                    .constellation
                    .points()
                    .iter()
                    .map(|c| inv * c.re)
                    .collect(),
                None => setup
                    .constellation
                    .points()
                    .iter()
                    .map(|c| tape.lift(c.re * const_scale))
                    .collect::<Result<_, AdError>>()?,
            };
            let x: Vec<Var<'t>> = batch.indices.iter().map(|&i| xtilde[i]).collect();
            let y = imdd_transmit_with(&x, noise);
            imdd_log2_posteriors(
                tape,
                &y,
                &xtilde,
                &ln_priors,
                params,
                setup.quad_nodes,
                &batch.indices,
                labels_opt,
            )?
        }
        _ => return Err(TrainerError::NoiseKindMismatch),
    };

    let loss = match setup.metric {
        Metric::Mi => mi_importance(
            tape,
            &weight_leaves,
            counts,
            &batch.indices,
            &posteriors.symbol_log2,
        )?,
        Metric::Bmi => bmi_importance(
            tape,
            &weight_leaves,
            counts,
            &batch.indices,
            posteriors
                .bit_log2_sum
                .as_ref()
                .expect("bit posteriors are recorded when the metric needs them"),
        )?,
    };
    Ok(LossGraph {
        loss,
        weight_leaves,
    })
}
