//! Monte Carlo rate estimation and the plain (unweighted) batch estimator.
//!
//! The sampled estimator draws symbols i.i.d. from the target distribution
//! and averages the per-sample demapper information; the source entropy is
//! known in closed form, so only the equivocation term is sampled and the
//! reported standard error covers exactly the sampled part. This is the
//! reference metric for the square-law channel, where no Gaussian
//! quadrature applies.

use super::ValidationError;
use crate::channels::{awgn_noise, imdd_sample, ImddParams};
use crate::demappers::{imdd_log_likelihood_nodes, log_sum_exp_f64};
use crate::distribution::ProbabilityVector;
use crate::trainer::{ChannelModel, Metric};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::LN_2;

/// A sampled value with its standard error of the mean.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Tabulated log-density of the square-law channel output for each
/// amplitude, on a uniform intensity grid with linear interpolation.
/// Building the table costs one quadrature evaluation per grid cell;
/// lookups afterwards are O(1), which is what makes million-sample
/// estimates affordable.
#[derive(Debug, Clone)]
pub struct ImddDensityTable {
    y_lo: f64,
    step: f64,
    ln_density: Vec<Vec<f64>>,
}

/// Values below this are clamped before interpolation; the corresponding
/// density (e^-700) is far beyond any representable sample.
const LN_DENSITY_FLOOR: f64 = -700.0;

impl ImddDensityTable {
    pub fn build(
        amps: &[f64],
        params: &ImddParams,
        grid_points: usize,
        quad_nodes: usize,
    ) -> Self {
        assert!(grid_points >= 2);
        let max_amp = amps.iter().cloned().fold(0.0, f64::max);
        let y_lo = -8.0 * params.sigma2;
        let y_hi = (max_amp + 8.0 * params.sigma1).powi(2) + 8.0 * params.sigma2;
        let step = (y_hi - y_lo) / (grid_points - 1) as f64;
        let ln_density = amps
            .iter()
            .map(|&a| {
                (0..grid_points)
                    .map(|i| {
                        let y = y_lo + i as f64 * step;
                        imdd_log_likelihood_nodes(y, a, params, quad_nodes)
                            .max(LN_DENSITY_FLOOR)
                    })
                    .collect()
            })
            .collect();
        Self {
            y_lo,
            step,
            ln_density,
        }
    }

    /// Interpolated log-density of output `y` under amplitude index `m`.
    /// Outputs outside the tabulated range (beyond eight standard
    /// deviations) clamp to the nearest edge.
    pub fn ln_likelihood(&self, m: usize, y: f64) -> f64 {
        let row = &self.ln_density[m];
        let pos = (y - self.y_lo) / self.step;
        if pos <= 0.0 {
            return row[0];
        }
        let top = (row.len() - 1) as f64;
        if pos >= top {
            return row[row.len() - 1];
        }
        let i = pos as usize;
        let frac = pos - i as f64;
        row[i] + frac * (row[i + 1] - row[i])
    }
}

/// Plug-in Monte Carlo estimate of the symbol- or bit-metric rate in bits
/// per symbol: symbols drawn i.i.d. from `p`, outputs drawn from the
/// channel, posteriors computed with `p` as prior on the given (already
/// scaled) points.
pub fn mc_metric<R: Rng>(
    channel: &ChannelModel,
    metric: Metric,
    points: &[Complex64],
    labels: &[u32],
    bits_per_symbol: u32,
    p: &ProbabilityVector,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate, ValidationError> {
    if points.len() != p.len() || labels.len() != p.len() {
        return Err(ValidationError::DimensionMismatch {
            points: points.len(),
            probabilities: p.len(),
        });
    }
    if samples == 0 {
        return Err(ValidationError::NoSamples);
    }
    let sampler =
        WeightedIndex::new(p.as_slice()).map_err(|_| ValidationError::NoSamples)?;
    let ln_p: Vec<f64> = p.as_slice().iter().map(|&v| v.ln()).collect();

    // Per-sample log2 of the relevant posterior(s); entropy added after.
    let mut terms = Vec::with_capacity(samples);
    let mut scores = vec![0.0; points.len()];
    let mut subset = Vec::with_capacity(points.len());
    match channel {
        ChannelModel::Awgn(awgn) => {
            let sigma2 = awgn.sigma2_total();
            for _ in 0..samples {
                let m = sampler.sample(rng);
                let y = points[m] + awgn_noise(sigma2, rng);
                for (k, ck) in points.iter().enumerate() {
                    scores[k] = ln_p[k] - (y - ck).norm_sqr() / sigma2;
                }
                terms.push(sample_log2_posterior(
                    &scores,
                    m,
                    labels,
                    bits_per_symbol,
                    metric,
                    &mut subset,
                ));
            }
        }
        ChannelModel::Imdd(params) => {
            let amps = positive_amplitudes(points)?;
            let table = ImddDensityTable::build(&amps, params, 4096, 512);
            for _ in 0..samples {
                let m = sampler.sample(rng);
                let y = imdd_sample(amps[m], params, rng);
                for k in 0..amps.len() {
                    scores[k] = ln_p[k] + table.ln_likelihood(k, y);
                }
                terms.push(sample_log2_posterior(
                    &scores,
                    m,
                    labels,
                    bits_per_symbol,
                    metric,
                    &mut subset,
                ));
            }
        }
    }

    let n = samples as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = if samples > 1 {
        terms.iter().map(|&t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        value: p.entropy_bits() + mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

fn sample_log2_posterior(
    scores: &[f64],
    sent: usize,
    labels: &[u32],
    bits_per_symbol: u32,
    metric: Metric,
    subset: &mut Vec<f64>,
) -> f64 {
    let ln_total = log_sum_exp_f64(scores);
    match metric {
        Metric::Mi => (scores[sent] - ln_total) / LN_2,
        Metric::Bmi => {
            let mut acc = 0.0;
            for k in 0..bits_per_symbol {
                let shift = bits_per_symbol - 1 - k;
                let b = (labels[sent] >> shift) & 1;
                subset.clear();
                for (j, &s) in scores.iter().enumerate() {
                    if (labels[j] >> shift) & 1 == b {
                        subset.push(s);
                    }
                }
                acc += log_sum_exp_f64(subset) - ln_total;
            }
            acc / LN_2
        }
    }
}

fn positive_amplitudes(points: &[Complex64]) -> Result<Vec<f64>, ValidationError> {
    if points.iter().all(|z| z.im == 0.0 && z.re > 0.0) {
        Ok(points.iter().map(|z| z.re).collect())
    } else {
        Err(ValidationError::NeedsPositiveAmplitudes)
    }
}

/// The unweighted constant-composition batch estimator, accumulated in
/// exactly the same order as the weighted training loss so the two agree
/// bit-for-bit when every weight is one: per symbol, the empirical-entropy
/// term plus the binned per-sample sum divided by the batch size, folded
/// left to right.
pub fn plain_batch_rate(counts: &[usize], indices: &[usize], per_sample_log2: &[f64]) -> f64 {
    assert_eq!(indices.len(), per_sample_log2.len());
    let n_total: usize = counts.iter().sum();
    assert_eq!(n_total, indices.len());
    assert!(counts.iter().all(|&c| c > 0), "empty bin");
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); counts.len()];
    for (&j, &v) in indices.iter().zip(per_sample_log2) {
        bins[j].push(v);
    }
    let inv_n = 1.0 / n_total as f64;
    let terms: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(j, &cnt)| {
            let q = cnt as f64 / n_total as f64;
            let bin = chain_add(&bins[j]);
            -(q * q.log2()) + bin * inv_n
        })
        .collect();
    chain_add(&terms)
}

fn chain_add(xs: &[f64]) -> f64 {
    xs.iter().copied().reduce(|a, b| a + b).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::channels::AwgnParams;
    use crate::constellation::{normalize, Constellation, NormConstraint};
    use crate::losses::mi_importance;
    use crate::validation::quadrature::{gh_mi_awgn, trapz_mi_imdd, QuadratureSpec};
    use crate::ExperimentRng;
    use rand::SeedableRng;

    #[test]
    fn separated_points_recover_the_source_entropy_exactly() {
        // At this separation the wrong-point likelihoods underflow to zero,
        // the posterior is exactly one, and only the entropy term remains.
        let points = [Complex64::new(-1e3, 0.0), Complex64::new(1e3, 0.0)];
        let p = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
        let mut rng = ExperimentRng::seed_from_u64(5);
        let est = mc_metric(
            &ChannelModel::Awgn(AwgnParams::new(0.0).unwrap()),
            Metric::Mi,
            &points,
            &[0, 1],
            1,
            &p,
            100_000,
            &mut rng,
        )
        .unwrap();
        assert!((est.value - p.entropy_bits()).abs() < 1e-15);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn standard_error_halves_when_samples_quadruple() {
        let c = Constellation::qam(4).unwrap();
        let p = ProbabilityVector::uniform(4).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        let channel = ChannelModel::Awgn(AwgnParams::new(3.0).unwrap());
        let mut rng = ExperimentRng::seed_from_u64(11);
        let small = mc_metric(
            &channel, Metric::Mi, &norm.points, c.labels(), 2, &p, 100_000, &mut rng,
        )
        .unwrap();
        let large = mc_metric(
            &channel, Metric::Mi, &norm.points, c.labels(), 2, &p, 400_000, &mut rng,
        )
        .unwrap();
        let ratio = small.std_error / large.std_error;
        assert!(
            (1.6..2.4).contains(&ratio),
            "ratio {ratio} ({} vs {})",
            small.std_error,
            large.std_error
        );
    }

    #[test]
    fn sampled_and_quadrature_rates_agree_on_the_gaussian_channel() {
        let c = Constellation::qam(16).unwrap();
        let masses: Vec<f64> = c.energies().iter().map(|&e| (-0.35 * e).exp()).collect();
        let p = ProbabilityVector::from_masses(masses).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        let awgn = AwgnParams::new(8.0).unwrap();
        let want = gh_mi_awgn(
            &norm.points,
            p.as_slice(),
            awgn.sigma2_total(),
            &QuadratureSpec::default(),
        );
        let mut rng = ExperimentRng::seed_from_u64(21);
        let est = mc_metric(
            &ChannelModel::Awgn(awgn),
            Metric::Mi,
            &norm.points,
            c.labels(),
            4,
            &p,
            150_000,
            &mut rng,
        )
        .unwrap();
        assert!(
            (est.value - want).abs() <= 3.0 * est.std_error,
            "mc {} +- {} vs quadrature {want}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn interpolated_square_law_table_tracks_the_quadrature_density() {
        let amps = [0.4, 1.1, 1.9];
        let params = ImddParams::new(0.15, 0.12).unwrap();
        let table = ImddDensityTable::build(&amps, &params, 4096, 512);
        let mut rng = ExperimentRng::seed_from_u64(3);
        for _ in 0..200 {
            let m = (rand::Rng::gen::<u32>(&mut rng) % 3) as usize;
            let y = imdd_sample(amps[m], &params, &mut rng);
            let direct = imdd_log_likelihood_nodes(y, amps[m], &params, 512);
            let interp = table.ln_likelihood(m, y);
            assert!(
                (direct - interp).abs() < 2e-3,
                "y {y}, amp {m}: {direct} vs {interp}"
            );
        }
    }

    #[test]
    fn sampled_square_law_rate_matches_the_trapezoid_reference() {
        let c = Constellation::imdd_pam(4).unwrap();
        let p = ProbabilityVector::new(vec![0.35, 0.3, 0.2, 0.15]).unwrap();
        let norm = normalize(&c, &p, NormConstraint::None).unwrap();
        let params = ImddParams::new(0.2, 0.2).unwrap();
        let amps: Vec<f64> = norm.points.iter().map(|z| z.re).collect();
        let want = trapz_mi_imdd(&amps, p.as_slice(), &params, 6000);
        let mut rng = ExperimentRng::seed_from_u64(17);
        let est = mc_metric(
            &ChannelModel::Imdd(params),
            Metric::Mi,
            &norm.points,
            c.labels(),
            2,
            &p,
            120_000,
            &mut rng,
        )
        .unwrap();
        assert!(
            (est.value - want).abs() <= 3.0 * est.std_error,
            "mc {} +- {} vs trapezoid {want}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn bit_metric_estimate_stays_below_the_symbol_metric() {
        let c = Constellation::qam(16).unwrap();
        let p = ProbabilityVector::uniform(16).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        let channel = ChannelModel::Awgn(AwgnParams::new(6.0).unwrap());
        let mut rng = ExperimentRng::seed_from_u64(9);
        let mi = mc_metric(
            &channel, Metric::Mi, &norm.points, c.labels(), 4, &p, 100_000, &mut rng,
        )
        .unwrap();
        let mut rng = ExperimentRng::seed_from_u64(9);
        let bmi = mc_metric(
            &channel, Metric::Bmi, &norm.points, c.labels(), 4, &p, 100_000, &mut rng,
        )
        .unwrap();
        // Same seed, same draws: the ordering holds sample by sample.
        assert!(bmi.value <= mi.value + 1e-12);
    }

    #[test]
    fn rejects_mismatched_dimensions_and_complex_square_law_inputs() {
        let p = ProbabilityVector::uniform(2).unwrap();
        let mut rng = ExperimentRng::seed_from_u64(1);
        let err = mc_metric(
            &ChannelModel::Awgn(AwgnParams::new(0.0).unwrap()),
            Metric::Mi,
            &[Complex64::new(1.0, 0.0)],
            &[0],
            1,
            &p,
            10,
            &mut rng,
        );
        assert!(matches!(err, Err(ValidationError::DimensionMismatch { .. })));
        let err = mc_metric(
            &ChannelModel::Imdd(ImddParams::new(0.1, 0.1).unwrap()),
            Metric::Mi,
            &[Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            &[0, 1],
            1,
            &p,
            10,
            &mut rng,
        );
        assert!(matches!(
            err,
            Err(ValidationError::NeedsPositiveAmplitudes)
        ));
    }

    #[test]
    fn plain_estimator_equals_the_unit_weight_training_loss_bitwise() {
        let counts = [3usize, 1, 2];
        let indices = [0usize, 1, 0, 2, 2, 0];
        let values = [-0.7, -1.3, -0.2, -2.1, -0.4, -0.9];
        let plain = plain_batch_rate(&counts, &indices, &values);

        let tape = Tape::new();
        let w: Vec<_> = (0..3).map(|_| tape.lift(1.0).unwrap()).collect();
        let lifted: Vec<_> = values.iter().map(|&v| tape.lift(v).unwrap()).collect();
        let loss = mi_importance(&tape, &w, &counts, &indices, &lifted).unwrap();
        assert_eq!(loss.value().to_bits(), plain.to_bits());
    }
}
