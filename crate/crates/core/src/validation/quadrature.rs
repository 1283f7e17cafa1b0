//! Deterministic numeric references for achievable rates.
//!
//! These functions answer "what rate does this distribution actually
//! achieve" by direct numerical integration, independent of the training
//! machinery: tensor-product Gauss-Hermite quadrature for the Gaussian
//! channel (where the conditional density is exactly a Gaussian weight)
//! and a dense trapezoid rule over the detected intensity for the
//! square-law channel.

use super::ValidationError;
use crate::channels::ImddParams;
use crate::demappers::{imdd_log_likelihood, log_sum_exp_f64};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

/// Validated quadrature configuration: nodes per dimension for the
/// two-dimensional Gaussian rules. Coarser than 16 nodes is refused;
/// the default of 64 keeps the rule error orders of magnitude below the
/// comparison tolerances used elsewhere (see the node-doubling test).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    nodes_per_dim: usize,
}

impl QuadratureSpec {
    pub fn new(nodes_per_dim: usize) -> Result<Self, ValidationError> {
        if nodes_per_dim < 16 {
            return Err(ValidationError::TooFewQuadratureNodes {
                nodes: nodes_per_dim,
            });
        }
        Ok(Self { nodes_per_dim })
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn rule(&self) -> GaussHermite {
        gauss_hermite(self.nodes_per_dim)
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_dim: 64 }
    }
}

/// Nodes and weights for integrals of the form
/// integral exp(-t^2) f(t) dt ~= sum_i w_i f(t_i), ordered by node.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Computes the rule by Newton iteration on the orthonormal recurrence.
/// The usual asymptotic root guesses converge in a handful of iterations
/// for any practical order.
pub fn gauss_hermite(n: usize) -> GaussHermite {
    assert!(n >= 1, "need at least one node");
    let pim4 = 1.0 / PI.powf(0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - i + 1],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            // One ulp of the outermost roots is larger than 1e-15, so the
            // cutoff must stay a touch above that.
            if dz.abs() < 3e-14 {
                converged = true;
                break;
            }
        }
        assert!(converged, "root {i} of order {n} did not converge");
        // Largest root goes at the top; mirror into the bottom half.
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        let w = 2.0 / (pp * pp);
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    GaussHermite { nodes, weights }
}

/// Symbol-metric mutual information in bits for a discrete constellation
/// over the complex Gaussian channel with total noise variance
/// `sigma2_total`, by tensor-product Gauss-Hermite quadrature. Expects
/// already-scaled points; zero-probability points contribute nothing.
pub fn gh_mi_awgn(
    points: &[Complex64],
    p: &[f64],
    sigma2_total: f64,
    spec: &QuadratureSpec,
) -> f64 {
    assert_eq!(points.len(), p.len());
    let rule = spec.rule();
    let sigma_dim = (sigma2_total / 2.0).sqrt();
    let step = 2.0f64.sqrt() * sigma_dim;
    let ln_p: Vec<f64> = p.iter().map(|&v| v.ln()).collect();
    let mut acc = 0.0;
    let mut scores = vec![0.0; points.len()];
    for (m, (&pm, cm)) in p.iter().zip(points).enumerate() {
        if pm == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (ti, wi) in rule.nodes.iter().zip(&rule.weights) {
            for (tj, wj) in rule.nodes.iter().zip(&rule.weights) {
                let y = cm + Complex64::new(step * ti, step * tj);
                for (k, ck) in points.iter().enumerate() {
                    scores[k] = ln_p[k] - (y - ck).norm_sqr() / sigma2_total;
                }
                // log posterior of the transmitted point, minus its prior:
                // exactly the information density in nats.
                let ln_ratio = scores[m] - log_sum_exp_f64(&scores) - ln_p[m];
                inner += wi * wj * ln_ratio;
            }
        }
        acc += pm * inner / PI;
    }
    acc / LN_2
}

/// Bit-metric rate in bits: source entropy minus the sum of per-bit
/// conditional entropies of a binary-output demapper, by the same
/// quadrature. Always at most [`gh_mi_awgn`] for the same inputs.
pub fn gh_bmi_awgn(
    points: &[Complex64],
    labels: &[u32],
    bits_per_symbol: u32,
    p: &[f64],
    sigma2_total: f64,
    spec: &QuadratureSpec,
) -> f64 {
    assert_eq!(points.len(), p.len());
    assert_eq!(points.len(), labels.len());
    let rule = spec.rule();
    let sigma_dim = (sigma2_total / 2.0).sqrt();
    let step = 2.0f64.sqrt() * sigma_dim;
    let ln_p: Vec<f64> = p.iter().map(|&v| v.ln()).collect();
    let mut acc = 0.0;
    let mut scores = vec![0.0; points.len()];
    let mut subset = Vec::with_capacity(points.len());
    for (m, (&pm, cm)) in p.iter().zip(points).enumerate() {
        if pm == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (ti, wi) in rule.nodes.iter().zip(&rule.weights) {
            for (tj, wj) in rule.nodes.iter().zip(&rule.weights) {
                let y = cm + Complex64::new(step * ti, step * tj);
                for (k, ck) in points.iter().enumerate() {
                    scores[k] = ln_p[k] - (y - ck).norm_sqr() / sigma2_total;
                }
                let ln_total = log_sum_exp_f64(&scores);
                let mut bit_terms = 0.0;
                for k in 0..bits_per_symbol {
                    let shift = bits_per_symbol - 1 - k;
                    let b = (labels[m] >> shift) & 1;
                    subset.clear();
                    for (j, &s) in scores.iter().enumerate() {
                        if (labels[j] >> shift) & 1 == b {
                            subset.push(s);
                        }
                    }
                    bit_terms += log_sum_exp_f64(&subset) - ln_total;
                }
                inner += wi * wj * bit_terms;
            }
        }
        acc += pm * inner / PI;
    }
    let entropy: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    (entropy + acc) / LN_2
}

fn imdd_y_grid(amps: &[f64], params: &ImddParams, points: usize) -> (f64, f64) {
    let max_amp = amps.iter().cloned().fold(0.0, f64::max);
    let y_lo = -8.0 * params.sigma2;
    let y_hi = (max_amp + 8.0 * params.sigma1).powi(2) + 8.0 * params.sigma2;
    (y_lo, (y_hi - y_lo) / (points - 1) as f64)
}

/// Symbol-metric mutual information in bits over the square-law channel by
/// a dense trapezoid rule on the detected intensity.
pub fn trapz_mi_imdd(amps: &[f64], p: &[f64], params: &ImddParams, y_points: usize) -> f64 {
    assert_eq!(amps.len(), p.len());
    assert!(y_points >= 2);
    let (y_lo, dy) = imdd_y_grid(amps, params, y_points);
    let ln_p: Vec<f64> = p.iter().map(|&v| v.ln()).collect();
    let mut acc = 0.0;
    let mut ln_liks = vec![0.0; amps.len()];
    let mut scores = vec![0.0; amps.len()];
    for i in 0..y_points {
        let y = y_lo + i as f64 * dy;
        let trap = if i == 0 || i == y_points - 1 { 0.5 } else { 1.0 };
        for (k, &a) in amps.iter().enumerate() {
            ln_liks[k] = imdd_log_likelihood(y, a, params);
            scores[k] = ln_liks[k] + ln_p[k];
        }
        let ln_mix = log_sum_exp_f64(&scores);
        let mut point = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            point += pk * ln_liks[k].exp() * (ln_liks[k] - ln_mix);
        }
        acc += trap * point;
    }
    (acc * dy) / LN_2
}

/// Bit-metric rate in bits over the square-law channel by the same
/// trapezoid rule.
pub fn trapz_bmi_imdd(
    amps: &[f64],
    labels: &[u32],
    bits_per_symbol: u32,
    p: &[f64],
    params: &ImddParams,
    y_points: usize,
) -> f64 {
    assert_eq!(amps.len(), p.len());
    assert_eq!(amps.len(), labels.len());
    assert!(y_points >= 2);
    let (y_lo, dy) = imdd_y_grid(amps, params, y_points);
    let ln_p: Vec<f64> = p.iter().map(|&v| v.ln()).collect();
    let mut acc = 0.0;
    let mut scores = vec![0.0; amps.len()];
    let mut lik = vec![0.0; amps.len()];
    let mut subset = Vec::with_capacity(amps.len());
    for i in 0..y_points {
        let y = y_lo + i as f64 * dy;
        let trap = if i == 0 || i == y_points - 1 { 0.5 } else { 1.0 };
        for (k, &a) in amps.iter().enumerate() {
            let ll = imdd_log_likelihood(y, a, params);
            lik[k] = ll.exp();
            scores[k] = ll + ln_p[k];
        }
        let ln_total = log_sum_exp_f64(&scores);
        let mut point = 0.0;
        for (m, &pm) in p.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            let mut bit_terms = 0.0;
            for k in 0..bits_per_symbol {
                let shift = bits_per_symbol - 1 - k;
                let b = (labels[m] >> shift) & 1;
                subset.clear();
                for (j, &s) in scores.iter().enumerate() {
                    if (labels[j] >> shift) & 1 == b {
                        subset.push(s);
                    }
                }
                bit_terms += log_sum_exp_f64(&subset) - ln_total;
            }
            point += pm * lik[m] * bit_terms;
        }
        acc += trap * point;
    }
    let entropy: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    (entropy + acc * dy) / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{normalize, Constellation, NormConstraint};
    use crate::distribution::ProbabilityVector;

    fn spec(n: usize) -> QuadratureSpec {
        QuadratureSpec::new(n).unwrap()
    }

    #[test]
    fn rule_reproduces_gaussian_moments() {
        let sqrt_pi = PI.sqrt();
        for &n in &[1usize, 2, 5, 20, 33, 64] {
            let rule = gauss_hermite(n);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - sqrt_pi).abs() < 1e-12 * sqrt_pi, "order {n}");
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!(rule.nodes.windows(2).all(|ab| ab[0] < ab[1]));
            // Exact for polynomials up to degree 2n-1:
            // integral exp(-t^2) t^(2k) = sqrt(pi) (2k-1)!! / 2^k.
            let mut dfact = 1.0;
            for k in 1..=(n - 1).min(6) {
                dfact *= 2.0 * k as f64 - 1.0;
                let want = sqrt_pi * dfact / 2.0f64.powi(k as i32);
                let got: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| w * t.powi(2 * k as i32))
                    .sum();
                assert!(
                    (got - want).abs() < 1e-10 * want.max(1.0),
                    "order {n}, moment {k}: {got} vs {want}"
                );
                let odd: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| w * t.powi(2 * k as i32 - 1))
                    .sum();
                assert!(odd.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nodes_are_symmetric_about_zero() {
        for &n in &[16usize, 17, 64] {
            let rule = gauss_hermite(n);
            for i in 0..n {
                let mirror = rule.nodes[n - 1 - i];
                assert!((rule.nodes[i] + mirror).abs() < 1e-13, "order {n} node {i}");
                assert!((rule.weights[i] - rule.weights[n - 1 - i]).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn spec_rejects_coarse_rules_and_defaults_to_64() {
        assert!(QuadratureSpec::new(15).is_err());
        assert!(QuadratureSpec::new(16).is_ok());
        assert_eq!(QuadratureSpec::default().nodes_per_dim(), 64);
    }

    /// Independent route for two antipodal points: the imaginary dimension
    /// carries nothing, so the rate reduces to a one-dimensional integral
    /// evaluated here by a dense trapezoid rule.
    fn antipodal_mi_reference(sigma2_total: f64) -> f64 {
        let sd = (sigma2_total / 2.0).sqrt();
        let n = 40_000;
        let lo = 1.0 - 10.0 * sd;
        let hi = 1.0 + 10.0 * sd;
        let dy = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let y = lo + i as f64 * dy;
            let gauss =
                (-(y - 1.0) * (y - 1.0) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt());
            acc += w * gauss * (1.0 + (-2.0 * y / (sd * sd)).exp()).log2();
        }
        1.0 - acc * dy
    }

    #[test]
    fn antipodal_rate_matches_the_one_dimensional_reference() {
        for &esn0_db in &[-2.0, 3.0, 8.0] {
            let sigma2 = 10.0f64.powf(-esn0_db / 10.0);
            let pts = [Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)];
            let got = gh_mi_awgn(&pts, &[0.5, 0.5], sigma2, &spec(64));
            let want = antipodal_mi_reference(sigma2);
            assert!((got - want).abs() < 1e-6, "esn0 {esn0_db}: {got} vs {want}");
        }
    }

    #[test]
    fn high_snr_rates_saturate_at_the_source_entropy() {
        let c = Constellation::qam(16).unwrap();
        let p = ProbabilityVector::uniform(16).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        let sigma2 = 10.0f64.powf(-30.0 / 10.0);
        let mi = gh_mi_awgn(&norm.points, p.as_slice(), sigma2, &spec(32));
        assert!(mi > 3.9999 && mi <= 4.0 + 1e-9, "mi {mi}");
        let bmi = gh_bmi_awgn(&norm.points, c.labels(), 4, p.as_slice(), sigma2, &spec(32));
        assert!(bmi > 3.9999 && bmi <= mi + 1e-9, "bmi {bmi}");
    }

    #[test]
    fn bit_metric_never_exceeds_the_symbol_metric() {
        let c = Constellation::qam(16).unwrap();
        let masses: Vec<f64> = c.energies().iter().map(|&e| (-0.4 * e).exp()).collect();
        let p = ProbabilityVector::from_masses(masses).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        for &esn0_db in &[0.0, 6.0, 12.0] {
            let sigma2 = 10.0f64.powf(-esn0_db / 10.0);
            let mi = gh_mi_awgn(&norm.points, p.as_slice(), sigma2, &spec(32));
            let bmi =
                gh_bmi_awgn(&norm.points, c.labels(), 4, p.as_slice(), sigma2, &spec(32));
            assert!(bmi <= mi + 1e-9, "esn0 {esn0_db}: bmi {bmi} > mi {mi}");
            assert!(mi <= p.entropy_bits() + 1e-9);
            assert!(mi > 0.0 && bmi > 0.0);
        }
    }

    #[test]
    fn rate_decreases_as_noise_grows() {
        let c = Constellation::qam(16).unwrap();
        let p = ProbabilityVector::uniform(16).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        let mut last = f64::INFINITY;
        for &esn0_db in &[18.0, 14.0, 10.0, 6.0, 2.0, -2.0] {
            let sigma2 = 10.0f64.powf(-esn0_db / 10.0);
            let mi = gh_mi_awgn(&norm.points, p.as_slice(), sigma2, &spec(32));
            assert!(mi < last, "esn0 {esn0_db}: {mi} not below {last}");
            last = mi;
        }
    }

    /// The default rule is used for comparisons at a 0.01-bit tolerance;
    /// doubling the nodes must move the value by far less than that.
    #[test]
    fn node_doubling_moves_the_rate_far_below_comparison_tolerances() {
        let c = Constellation::qam(16).unwrap();
        let masses: Vec<f64> = c.energies().iter().map(|&e| (-0.3 * e).exp()).collect();
        let p = ProbabilityVector::from_masses(masses).unwrap();
        let norm = normalize(&c, &p, NormConstraint::AveragePower).unwrap();
        let sigma2 = 10.0f64.powf(-10.0 / 10.0);
        let coarse = gh_mi_awgn(&norm.points, p.as_slice(), sigma2, &spec(64));
        let fine = gh_mi_awgn(&norm.points, p.as_slice(), sigma2, &spec(128));
        assert!(
            (coarse - fine).abs() < 1e-4,
            "64 vs 128 nodes: {coarse} vs {fine}"
        );
    }

    #[test]
    fn one_bit_labels_collapse_both_metrics() {
        let pts = [Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)];
        let p = [0.6, 0.4];
        let sigma2 = 0.5;
        let mi = gh_mi_awgn(&pts, &p, sigma2, &spec(40));
        let bmi = gh_bmi_awgn(&pts, &[0, 1], 1, &p, sigma2, &spec(40));
        assert!((mi - bmi).abs() < 1e-12);
    }

    #[test]
    fn symmetric_inputs_give_symmetric_rates() {
        let pts = [
            Complex64::new(-3.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
        ];
        let p = [0.1, 0.4, 0.4, 0.1];
        let rev: Vec<Complex64> = pts.iter().rev().map(|c| -c).collect();
        let a = gh_mi_awgn(&pts, &p, 0.8, &spec(32));
        let b = gh_mi_awgn(&rev, &p, 0.8, &spec(32));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_points_are_ignored() {
        let pts = [
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(5.0, 0.0),
        ];
        let with_zero = gh_mi_awgn(&pts, &[0.5, 0.5, 0.0], 0.5, &spec(40));
        let without = gh_mi_awgn(&pts[..2], &[0.5, 0.5], 0.5, &spec(40));
        assert!(with_zero.is_finite());
        assert!((with_zero - without).abs() < 1e-12);
    }

    #[test]
    fn square_law_rates_are_sane_and_ordered() {
        let c = Constellation::imdd_pam(4).unwrap();
        let amps: Vec<f64> = c.points().iter().map(|z| z.re).collect();
        let params = ImddParams::new(0.15, 0.1).unwrap();
        let p = [0.4, 0.3, 0.2, 0.1];
        let mi = trapz_mi_imdd(&amps, &p, &params, 6000);
        let bmi = trapz_bmi_imdd(&amps, c.labels(), 2, &p, &params, 6000);
        let h: f64 = p.iter().map(|&v| -v * v.log2()).sum();
        assert!(mi > 0.0 && mi <= h + 1e-6, "mi {mi}, h {h}");
        assert!(bmi <= mi + 1e-9, "bmi {bmi} > mi {mi}");
    }

    #[test]
    fn square_law_rate_saturates_when_noise_vanishes() {
        let amps = [0.5, 1.5, 2.5, 3.5];
        let params = ImddParams::new(0.01, 0.01).unwrap();
        let p = [0.25; 4];
        let mi = trapz_mi_imdd(&amps, &p, &params, 20_000);
        assert!(mi > 1.9999 && mi <= 2.0 + 1e-6, "mi {mi}");
    }
}
