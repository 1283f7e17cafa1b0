//! `pcs validate`: read a finished `result.json` back and check it with
//! machinery that is independent of the training path — quadrature or
//! fresh Monte-Carlo sampling for the rate, finite differences for the
//! gradients. Any failed check exits 3; an unreadable or malformed file
//! exits 2.

use super::{numeric, real_amplitudes, reference_rate};
use crate::config::ResolvedParameters;
use crate::output::read_result_file;
use crate::CliError;
use pcs_core::constellation::{normalize, Constellation};
use pcs_core::distribution::ProbabilityVector;
use pcs_core::trainer::{ChannelModel, PipelineSetup};
use pcs_core::validation::{gradient_exactness_check, mc_metric};
use pcs_core::ExperimentRng;
use rand::SeedableRng;
use std::path::Path;

/// Maximum acceptable relative error between reverse-mode and
/// finite-difference gradients.
const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Generator stream reserved for validation sampling; far away from any
/// stream a training run or sweep can use.
const VALIDATION_STREAM: u64 = 1 << 40;

pub struct ValidateArgs {
    /// Allowed |recomputed - trace| in bits (widened by sampling error
    /// where the recomputation is itself Monte Carlo).
    pub tolerance: f64,
    pub quadrature_nodes: usize,
    pub mc_samples: usize,
}

pub fn run(result_path: &Path, args: &ValidateArgs) -> Result<(), CliError> {
    if args.tolerance <= 0.0 || !args.tolerance.is_finite() {
        return Err(CliError::Config("--tolerance must be positive".into()));
    }
    if args.quadrature_nodes < 16 {
        return Err(CliError::Config("--nodes must be at least 16".into()));
    }
    if args.mc_samples == 0 {
        return Err(CliError::Config("--mc-samples must be positive".into()));
    }

    let stored = read_result_file(result_path)?;
    let parameters = &stored.parameters;
    let constellation = parameters.constellation()?;
    let p_raw = &stored.result.distribution;
    println!(
        "[validate] {} (seed {}, stream {})",
        result_path.display(),
        stored.seed,
        stored.chosen_stream
    );
    let mut failures = 0usize;

    // 1. The stored distribution must be a point on the simplex.
    let sum: f64 = p_raw.iter().sum();
    let simplex_ok = p_raw.len() == constellation.size()
        && p_raw.iter().all(|v| v.is_finite() && *v >= 0.0)
        && (sum - 1.0).abs() <= 1e-9;
    report(
        "distribution on the probability simplex",
        format!("{} entries, total mass {sum}", p_raw.len()),
        simplex_ok,
        &mut failures,
    );

    // 2. Recompute the achieved rate independently and compare with the
    //    final epoch of the training trace.
    let traced = stored
        .result
        .epoch_records
        .last()
        .map(|epoch| epoch.mean_rate);
    match (simplex_ok, traced) {
        (true, Some(traced)) => {
            let p = ProbabilityVector::from_masses(p_raw.clone()).map_err(numeric)?;
            let (recomputed, widening) =
                recompute_rate(&constellation, &p, parameters, args, stored.seed)?;
            let discrepancy = (recomputed - traced).abs();
            let allowed = args.tolerance + widening;
            report(
                "independent rate recomputation",
                format!(
                    "recomputed {recomputed} vs trace {traced} bits/symbol \
                     (|diff| {discrepancy}, allowed {allowed})"
                ),
                discrepancy <= allowed,
                &mut failures,
            );
        }
        _ => report(
            "independent rate recomputation",
            "skipped: no valid distribution/trace to compare".into(),
            false,
            &mut failures,
        ),
    }

    // 3. Gradient spot check of the training pipeline itself, on a small
    //    instance of the same channel, metric, and constraint.
    let toy = toy_setup(parameters.channel, parameters)?;
    let toy_p = ProbabilityVector::uniform(toy.constellation.size()).map_err(numeric)?;
    let check = gradient_exactness_check(&toy, &toy_p, 256, stored.seed ^ 0x9e37_79b9, 1e-6)
        .map_err(numeric)?;
    report(
        "gradient exactness on a toy instance",
        format!("max relative error {}", check.max_rel_error),
        check.max_rel_error <= GRADIENT_TOLERANCE,
        &mut failures,
    );

    if failures > 0 {
        return Err(CliError::Numeric(format!(
            "validation failed: {failures} check(s) did not pass"
        )));
    }
    println!("validation passed: 3 checks");
    Ok(())
}

fn report(name: &str, detail: String, ok: bool, failures: &mut usize) {
    if !ok {
        *failures += 1;
    }
    println!(
        "[validate] {name}: {detail} -> {}",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Recomputed rate plus how much the comparison tolerance must widen to
/// absorb the recomputation's own sampling error (zero for quadrature).
fn recompute_rate(
    c: &Constellation,
    p: &ProbabilityVector,
    parameters: &ResolvedParameters,
    args: &ValidateArgs,
    seed: u64,
) -> Result<(f64, f64), CliError> {
    let channel = parameters.channel;
    match channel {
        ChannelModel::Awgn(_) => {
            let rate = reference_rate(
                c,
                p,
                parameters.constraint,
                &channel,
                parameters.metric,
                args.quadrature_nodes,
            )?;
            Ok((rate, 0.0))
        }
        ChannelModel::Imdd(_) => {
            let normalized = normalize(c, p, parameters.constraint).map_err(numeric)?;
            let _ = real_amplitudes(&normalized.points)?;
            let mut rng = ExperimentRng::seed_from_u64(seed);
            rng.set_stream(VALIDATION_STREAM);
            let estimate = mc_metric(
                &channel,
                parameters.metric,
                &normalized.points,
                c.labels(),
                c.bits_per_symbol(),
                p,
                args.mc_samples,
                &mut rng,
            )
            .map_err(numeric)?;
            Ok((estimate.value, 3.0 * estimate.std_error))
        }
    }
}

fn toy_setup(channel: ChannelModel, parameters: &ResolvedParameters) -> Result<PipelineSetup, CliError> {
    let constellation = match channel {
        ChannelModel::Awgn(_) => Constellation::qam(4),
        ChannelModel::Imdd(_) => Constellation::imdd_pam(4),
    }
    .map_err(numeric)?;
    Ok(PipelineSetup {
        channel,
        constellation,
        constraint: parameters.constraint,
        metric: parameters.metric,
        quad_nodes: parameters.quad_nodes.min(64),
    })
}
