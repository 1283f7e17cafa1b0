//! Importance-weighted rate estimates recorded on the autodiff tape.
//!
//! A batch is drawn with a constant composition: symbol m appears exactly
//! n_m times, so the proposal probability is q_m = n_m / N. The learned
//! weights w_m reweight the proposal back to the working distribution
//! p_m = w_m q_m, and every batch average becomes an importance-weighted
//! average without redrawing samples.
//!
//! The symbol-metric estimate factors per bin, with self-normalized
//! weights wt_m = w_m / z, z = sum_j w_j q_j:
//!
//!   rate = sum_m [ -q_m log2(q_m) wt_m - q_m (wt_m log2 wt_m)
//!                  + (wt_m * S_m) / N ]
//!
//! where S_m sums log2 Q(x_n | y_n) over the samples in bin m. The first
//! two terms are the entropy of p evaluated through the factorization
//! p_m = wt_m q_m; the last is the importance-weighted conditional term.
//! The bit-metric estimate is the same expression with the per-sample
//! summed bit posteriors in place of the symbol posterior.
//!
//! Projection keeps z at one, so the normalizer never changes the value;
//! it changes the gradient. Without it the estimate is not invariant under
//! a common rescaling of the weights, and the gradient picks up a large
//! component along the all-ones direction — a direction the simplex
//! projection cancels anyway. Per-coordinate optimizers (sign-betting in
//! particular) would spend their adaptation on that dead direction and
//! move every coordinate in lockstep; with z on the tape they see only
//! the shaping signal.
//!
//! Summation runs in ascending symbol order, ascending sample order inside
//! each bin, so results are reproducible bit for bit and reduce exactly to
//! the plain unweighted estimator when every weight is one.

use crate::autodiff::{AdError, Tape, Var};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("weights ({weights}) and counts ({counts}) must have the same length")]
    LengthMismatch { weights: usize, counts: usize },
    #[error("symbol {symbol} has a zero count; every symbol must appear at least once")]
    EmptyBin { symbol: usize },
    #[error("composition expects {expected} samples but the batch carries {got}")]
    BatchSizeMismatch { expected: usize, got: usize },
    #[error("symbol {symbol} should appear {expected} times but appears {got}")]
    CompositionMismatch {
        symbol: usize,
        expected: usize,
        got: usize,
    },
    #[error("sample {sample} names symbol {symbol}, outside the {m}-point constellation")]
    IndexOutOfRange {
        sample: usize,
        symbol: usize,
        m: usize,
    },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// Symbol-metric rate estimate (bits/symbol) for one batch.
/// `symbol_log2[n]` must hold log2 Q(x_n | y_n) for the symbol actually
/// sent in sample n.
pub fn mi_importance<'t>(
    tape: &'t Tape,
    weights: &[Var<'t>],
    counts: &[usize],
    indices: &[usize],
    symbol_log2: &[Var<'t>],
) -> Result<Var<'t>, LossError> {
    importance_rate(tape, weights, counts, indices, symbol_log2)
}

/// Bit-metric rate estimate (bits/symbol) for one batch.
/// `bit_log2_sum[n]` must hold sum_k log2 Q(b_k(x_n) | y_n).
pub fn bmi_importance<'t>(
    tape: &'t Tape,
    weights: &[Var<'t>],
    counts: &[usize],
    indices: &[usize],
    bit_log2_sum: &[Var<'t>],
) -> Result<Var<'t>, LossError> {
    importance_rate(tape, weights, counts, indices, bit_log2_sum)
}

fn importance_rate<'t>(
    tape: &'t Tape,
    weights: &[Var<'t>],
    counts: &[usize],
    indices: &[usize],
    per_sample_log2: &[Var<'t>],
) -> Result<Var<'t>, LossError> {
    let m = weights.len();
    if counts.len() != m {
        return Err(LossError::LengthMismatch {
            weights: m,
            counts: counts.len(),
        });
    }
    if let Some(symbol) = counts.iter().position(|&c| c == 0) {
        return Err(LossError::EmptyBin { symbol });
    }
    let n_total: usize = counts.iter().sum();
    if indices.len() != n_total {
        return Err(LossError::BatchSizeMismatch {
            expected: n_total,
            got: indices.len(),
        });
    }
    if per_sample_log2.len() != n_total {
        return Err(LossError::BatchSizeMismatch {
            expected: n_total,
            got: per_sample_log2.len(),
        });
    }

    let mut bins: Vec<Vec<Var<'t>>> = counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    for (sample, (&symbol, &term)) in indices.iter().zip(per_sample_log2).enumerate() {
        if symbol >= m {
            return Err(LossError::IndexOutOfRange { sample, symbol, m });
        }
        bins[symbol].push(term);
    }
    for (symbol, bin) in bins.iter().enumerate() {
        if bin.len() != counts[symbol] {
            return Err(LossError::CompositionMismatch {
                symbol,
                expected: counts[symbol],
                got: bin.len(),
            });
        }
    }

    let inv_n = 1.0 / n_total as f64;
    let masses: Vec<Var<'t>> = weights
        .iter()
        .zip(counts)
        .map(|(&w, &c)| w * (c as f64 * inv_n))
        .collect();
    let inv_z = 1.0 / tape.sum(&masses)?;
    let mut terms = Vec::with_capacity(m);
    for j in 0..m {
        let q = counts[j] as f64 / n_total as f64;
        let wt = weights[j] * inv_z;
        let entropy_cross = wt * (-(q * q.log2()));
        let entropy_weight = (wt * wt.log2()?) * q;
        let conditional = (wt * tape.sum(&bins[j])?) * inv_n;
        terms.push(entropy_cross - entropy_weight + conditional);
    }
    Ok(tape.sum(&terms)?)
}
