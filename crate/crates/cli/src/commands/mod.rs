//! Subcommand implementations. Everything here turns a checked
//! [`ExperimentConfig`](crate::config::ExperimentConfig) into core calls
//! plus files on disk; numerical failures surface as
//! [`CliError::Numeric`](crate::CliError) so the process exits 3 rather
//! than panicking.

pub mod baseline;
pub mod optimize;
pub mod sweep;
pub mod validate;

use crate::config::ExperimentConfig;
use crate::CliError;
use pcs_core::constellation::{normalize, Constellation, NormConstraint};
use pcs_core::distribution::ProbabilityVector;
use pcs_core::trainer::{train, ChannelModel, Metric, TrainingResult};
use pcs_core::validation::{gh_bmi_awgn, gh_mi_awgn, trapz_bmi_imdd, trapz_mi_imdd, QuadratureSpec};

/// Output-grid resolution of the deterministic square-law trapezoid rule.
/// Gaussian tails decay fast enough that this is converged well past any
/// tolerance used in reports.
pub(crate) const TRAPZ_POINTS: usize = 8192;

pub(crate) fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

/// Deterministic rate of distribution `p` in bits per symbol: Gauss–Hermite
/// quadrature on the Gaussian channel, a dense trapezoid rule on the
/// square-law channel. The constellation is rescaled under `constraint`
/// for this `p`, matching what training optimizes.
pub(crate) fn reference_rate(
    c: &Constellation,
    p: &ProbabilityVector,
    constraint: NormConstraint,
    channel: &ChannelModel,
    metric: Metric,
    gh_nodes: usize,
) -> Result<f64, CliError> {
    let normalized = normalize(c, p, constraint).map_err(numeric)?;
    match channel {
        ChannelModel::Awgn(awgn) => {
            let spec = QuadratureSpec::new(gh_nodes).map_err(numeric)?;
            let sigma2 = awgn.sigma2_total();
            Ok(match metric {
                Metric::Mi => gh_mi_awgn(&normalized.points, p.as_slice(), sigma2, &spec),
                Metric::Bmi => gh_bmi_awgn(
                    &normalized.points,
                    c.labels(),
                    c.bits_per_symbol(),
                    p.as_slice(),
                    sigma2,
                    &spec,
                ),
            })
        }
        ChannelModel::Imdd(params) => {
            let amps = real_amplitudes(&normalized.points)?;
            Ok(match metric {
                Metric::Mi => trapz_mi_imdd(&amps, p.as_slice(), params, TRAPZ_POINTS),
                Metric::Bmi => trapz_bmi_imdd(
                    &amps,
                    c.labels(),
                    c.bits_per_symbol(),
                    p.as_slice(),
                    params,
                    TRAPZ_POINTS,
                ),
            })
        }
    }
}

/// Real non-negative amplitudes of a scaled constellation, as needed by the
/// square-law channel. Config checks make this unreachable for well-formed
/// input, so failure is a numerical abort, not a config diagnostic.
pub(crate) fn real_amplitudes(points: &[num_complex::Complex64]) -> Result<Vec<f64>, CliError> {
    points
        .iter()
        .map(|z| {
            if z.im == 0.0 && z.re >= 0.0 {
                Ok(z.re)
            } else {
                Err(CliError::Numeric(format!(
                    "square-law channel needs non-negative real amplitudes, got {z}"
                )))
            }
        })
        .collect()
}

/// Runs `restarts` independent trainings on generator streams
/// `base_stream..` and keeps the one with the best final-epoch mean rate
/// (ties keep the earliest stream, so reruns pick the same winner).
pub(crate) fn run_restarts(
    config: &ExperimentConfig,
    channel: ChannelModel,
    seed: u64,
    base_stream: u64,
) -> Result<(TrainingResult, u64), CliError> {
    let mut best: Option<(TrainingResult, u64)> = None;
    for restart in 0..config.experiment.restarts {
        let stream = base_stream + restart as u64;
        let training = config.training_config(channel, seed, stream)?;
        let result =
            train(&training).map_err(|e| CliError::Numeric(format!("training aborted: {e}")))?;
        if best
            .as_ref()
            .map_or(true, |(kept, _)| final_rate(kept) < final_rate(&result))
        {
            best = Some((result, stream));
        }
    }
    Ok(best.expect("restarts is validated to be at least 1"))
}

pub(crate) fn final_rate(result: &TrainingResult) -> f64 {
    result
        .epoch_records
        .last()
        .map_or(f64::NEG_INFINITY, |epoch| epoch.mean_rate)
}
