//! Alternating-maximization computation of the capacity-achieving input
//! distribution of a discrete memoryless channel, plus builders that
//! discretize the continuous channels onto an output grid. The capacity
//! lower bound it maintains is non-decreasing, and the gap to the matching
//! upper bound certifies how converged a run is.

use super::ValidationError;
use crate::channels::ImddParams;
use crate::demappers::imdd_log_likelihood;
use std::f64::consts::{LN_2, PI};

/// Converged state of [`blahut_arimoto`].
#[derive(Debug, Clone)]
pub struct BaResult {
    pub capacity_bits: f64,
    pub distribution: Vec<f64>,
    pub iterations: usize,
    /// Distance from the capacity lower bound to the per-iteration upper
    /// bound at the final iterate, in bits.
    pub upper_bound_gap_bits: f64,
    /// Capacity lower bound after each iteration, in bits. Non-decreasing.
    pub lower_bounds_bits: Vec<f64>,
}

/// Runs the alternating updates until the capacity lower bound moves by
/// less than `tol_bits` between iterations. `likelihood[m][j]` holds the
/// channel density at output cell j given input m, times the cell width;
/// rows are renormalized internally so the discrete channel is exactly
/// stochastic. The input alphabet is fixed: points are not rescaled as the
/// distribution moves.
pub fn blahut_arimoto(
    likelihood: &[Vec<f64>],
    tol_bits: f64,
    max_iters: usize,
) -> Result<BaResult, ValidationError> {
    let m_in = likelihood.len();
    if m_in == 0 || likelihood[0].is_empty() {
        return Err(ValidationError::EmptyLikelihoodMatrix);
    }
    let n_out = likelihood[0].len();
    let mut w = Vec::with_capacity(m_in);
    for (row_idx, row) in likelihood.iter().enumerate() {
        if row.len() != n_out {
            return Err(ValidationError::RaggedLikelihoodMatrix { row: row_idx });
        }
        let mass: f64 = row.iter().sum();
        if !row.iter().all(|&v| v.is_finite() && v >= 0.0) || mass <= 0.0 {
            return Err(ValidationError::InvalidLikelihoodRow { row: row_idx });
        }
        w.push(row.iter().map(|&v| v / mass).collect::<Vec<f64>>());
    }

    let mut r = vec![1.0 / m_in as f64; m_in];
    let mut divergence = vec![0.0; m_in];
    let mut output = vec![0.0; n_out];
    let mut lower_bounds_bits = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    for iteration in 1..=max_iters {
        for q in output.iter_mut() {
            *q = 0.0;
        }
        for (rm, row) in r.iter().zip(&w) {
            for (q, &wj) in output.iter_mut().zip(row) {
                *q += rm * wj;
            }
        }
        for (d, row) in divergence.iter_mut().zip(&w) {
            *d = row
                .iter()
                .zip(&output)
                .filter(|(&wj, _)| wj > 0.0)
                .map(|(&wj, &qj)| wj * (wj / qj).ln())
                .sum();
        }
        // Numerically stable log of sum r_m exp(D_m), and the update
        // r_m <- r_m exp(D_m) / (that sum), sharing the same shift.
        let shift = divergence
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (rm, &d) in r.iter_mut().zip(&divergence) {
            *rm *= (d - shift).exp();
            total += *rm;
        }
        let lower_nats = shift + total.ln();
        for rm in r.iter_mut() {
            *rm /= total;
        }
        let lower_bits = lower_nats / LN_2;
        let upper_bits = shift / LN_2;
        lower_bounds_bits.push(lower_bits);
        if (lower_bits - previous).abs() < tol_bits {
            return Ok(BaResult {
                capacity_bits: lower_bits,
                distribution: r,
                iterations: iteration,
                upper_bound_gap_bits: upper_bits - lower_bits,
                lower_bounds_bits,
            });
        }
        previous = lower_bits;
    }
    Err(ValidationError::Convergence {
        iterations: max_iters,
        capacity_bits: previous,
        distribution: r,
    })
}

/// Discretized real-line Gaussian channel for a real constellation.
/// The imaginary output component carries no information, so the matrix
/// is built over the real part alone, whose noise variance is half the
/// total. Cells are trapezoid-weighted and span eight standard deviations
/// past the outermost amplitudes.
pub fn awgn_real_likelihood_matrix(
    amps: &[f64],
    sigma2_total: f64,
    cells: usize,
) -> Vec<Vec<f64>> {
    assert!(cells >= 2);
    let sigma_dim = (sigma2_total / 2.0).sqrt();
    let lo = amps.iter().cloned().fold(f64::INFINITY, f64::min) - 8.0 * sigma_dim;
    let hi = amps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 8.0 * sigma_dim;
    let dy = (hi - lo) / (cells - 1) as f64;
    let norm = 1.0 / (sigma_dim * (2.0 * PI).sqrt());
    amps.iter()
        .map(|&a| {
            (0..cells)
                .map(|j| {
                    let y = lo + j as f64 * dy;
                    let trap = if j == 0 || j == cells - 1 { 0.5 } else { 1.0 };
                    let z = (y - a) / sigma_dim;
                    trap * dy * norm * (-0.5 * z * z).exp()
                })
                .collect()
        })
        .collect()
}

/// Discretized square-law channel over its detected-intensity support,
/// trapezoid-weighted.
pub fn imdd_likelihood_matrix(
    amps: &[f64],
    params: &ImddParams,
    cells: usize,
) -> Vec<Vec<f64>> {
    assert!(cells >= 2);
    let max_amp = amps.iter().cloned().fold(0.0, f64::max);
    let lo = -8.0 * params.sigma2;
    let hi = (max_amp + 8.0 * params.sigma1).powi(2) + 8.0 * params.sigma2;
    let dy = (hi - lo) / (cells - 1) as f64;
    amps.iter()
        .map(|&a| {
            (0..cells)
                .map(|j| {
                    let y = lo + j as f64 * dy;
                    let trap = if j == 0 || j == cells - 1 { 0.5 } else { 1.0 };
                    trap * dy * imdd_log_likelihood(y, a, params).exp()
                })
                .collect()
        })
        .collect()
}
