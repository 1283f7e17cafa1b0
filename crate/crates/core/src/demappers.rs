//! Channel likelihoods and symbol/bit posteriors.
//!
//! Two independent routes exist for the square-law detection density and are
//! cross-checked in tests: the primary route integrates the folded Gaussian
//! field amplitude against the post-detection Gaussian on a fixed grid
//! (smooth in x and y, so it can also be recorded on the autodiff tape), and
//! the reference route inverts the closed-form characteristic function of
//! the detected intensity.
//!
//! Posterior computations are done in the log domain with the running
//! maximum subtracted, so they stay finite whenever at least one prior-
//! weighted likelihood is non-zero. Bit posteriors are sums of symbol
//! posteriors over the matching label subset, which makes the
//! marginalization identity hold by construction.

use crate::autodiff::{log_sum_exp, AdError, ComplexVar, Tape, Var};
use crate::channels::ImddParams;
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};
use thiserror::Error;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemapperError {
    #[error("quadrature grid ends at {u_max} but must cover [0, {required}]")]
    GridTooNarrow { u_max: f64, required: f64 },
    #[error("all prior-weighted likelihoods are zero; posterior is undefined")]
    DegeneratePosterior,
    #[error(transparent)]
    Ad(#[from] AdError),
}

// ---------------------------------------------------------------------------
// AWGN likelihood
// ---------------------------------------------------------------------------

/// Complex Gaussian density with total variance `sigma2_total`:
/// exp(-|y - c|^2 / sigma2) / (pi * sigma2).
pub fn awgn_likelihood(y: Complex64, c: Complex64, sigma2_total: f64) -> f64 {
    ((y - c).norm_sqr() / -sigma2_total).exp() / (PI * sigma2_total)
}

/// ln of [`awgn_likelihood`]; finite for all finite inputs.
pub fn awgn_log_likelihood(y: Complex64, c: Complex64, sigma2_total: f64) -> f64 {
    (y - c).norm_sqr() / -sigma2_total - (PI * sigma2_total).ln()
}

// ---------------------------------------------------------------------------
// Square-law detection likelihood, quadrature route
// ---------------------------------------------------------------------------

fn gauss(v: f64, mu: f64, sigma: f64) -> f64 {
    let z = (v - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Density of y = (x + n1)^2 + n2 for a non-negative amplitude x.
///
/// Substituting the field amplitude u = |x + n1| gives
///   p(y|x) = integral over u >= 0 of
///            [N(u; x, s1) + N(u; -x, s1)] * N(y - u^2; 0, s2) du,
/// an everywhere-smooth integrand with no oscillation. The even symmetry of
/// the folded term at u = 0 and the Gaussian decay at the upper end make the
/// trapezoid rule converge fast; 512 nodes on [0, x + 8*s1] are enough for
/// the tolerances checked in the test suite.
pub fn imdd_likelihood(y: f64, x: f64, params: &ImddParams) -> f64 {
    imdd_likelihood_grid(y, x, params, x + 8.0 * params.sigma1, 512)
        .expect("default grid covers its own support")
}

/// As [`imdd_likelihood`] with an explicit grid; the grid must cover
/// [0, x + 8*sigma1].
pub fn imdd_likelihood_grid(
    y: f64,
    x: f64,
    params: &ImddParams,
    u_max: f64,
    nodes: usize,
) -> Result<f64, DemapperError> {
    assert!(x >= 0.0, "amplitude must be non-negative");
    assert!(nodes >= 2, "need at least two quadrature nodes");
    let required = x + 8.0 * params.sigma1;
    if u_max < required {
        return Err(DemapperError::GridTooNarrow { u_max, required });
    }
    let (s1, s2) = (params.sigma1, params.sigma2);
    let du = u_max / (nodes - 1) as f64;
    let mut acc = 0.0;
    for k in 0..nodes {
        let u = k as f64 * du;
        let w = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        let folded = gauss(u, x, s1) + gauss(u, -x, s1);
        acc += w * folded * gauss(y - u * u, 0.0, s2);
    }
    Ok(acc * du)
}

/// ln p(y|x) evaluated fully in the log domain, so it stays meaningful far
/// into the tails where the linear-domain integral underflows to zero.
pub fn imdd_log_likelihood(y: f64, x: f64, params: &ImddParams) -> f64 {
    imdd_log_likelihood_nodes(y, x, params, 512)
}

pub fn imdd_log_likelihood_nodes(y: f64, x: f64, params: &ImddParams, nodes: usize) -> f64 {
    assert!(x >= 0.0, "amplitude must be non-negative");
    assert!(nodes >= 2, "need at least two quadrature nodes");
    let (s1, s2) = (params.sigma1, params.sigma2);
    let u_max = x + 8.0 * s1;
    let du = u_max / (nodes - 1) as f64;
    let inv2s1 = -0.5 / (s1 * s1);
    let inv2s2 = -0.5 / (s2 * s2);
    let ln_norm = -(s1.ln() + s2.ln() + (2.0 * PI).ln());
    let mut terms = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let u = k as f64 * du;
        let ln_w = if k == 0 || k == nodes - 1 { -LN_2 } else { 0.0 };
        let a = (u - x) * (u - x) * inv2s1;
        let b = (u + x) * (u + x) * inv2s1;
        let folded = log_sum_exp_f64(&[a, b]);
        let d = y - u * u;
        terms.push(ln_w + ln_norm + folded + d * d * inv2s2);
    }
    log_sum_exp_f64(&terms) + du.ln()
}

// ---------------------------------------------------------------------------
// Square-law detection density, characteristic-function route
// ---------------------------------------------------------------------------

/// Characteristic function of y = (x + n1)^2 + n2:
/// (1 - 2 j s1^2 t)^(-1/2) * exp(j x^2 t / (1 - 2 j s1^2 t) - s2^2 t^2 / 2).
/// The first factor is the scaled non-central chi-square (one degree of
/// freedom) part; the second Gaussian factor comes from n2.
pub fn imdd_cf(t: f64, x: f64, sigma1: f64, sigma2: f64) -> Complex64 {
    let d = Complex64::new(1.0, -2.0 * sigma1 * sigma1 * t);
    let exponent = Complex64::new(0.0, x * x * t) / d
        + Complex64::new(-0.5 * sigma2 * sigma2 * t * t, 0.0);
    exponent.exp() / d.sqrt()
}

/// Reference density by numerically inverting [`imdd_cf`]. Conjugate
/// symmetry collapses the inversion to a real cosine-type integral over
/// t >= 0; the range is grown until |cf| < 1e-12 and the step resolves the
/// e^(-jty) oscillation.
pub fn imdd_density_via_cf(y: f64, x: f64, params: &ImddParams) -> f64 {
    let (s1, s2) = (params.sigma1, params.sigma2);
    let mut t_max = 1.0;
    while imdd_cf(t_max, x, s1, s2).norm() >= 1e-12 {
        t_max *= 2.0;
        assert!(t_max < 1e12, "characteristic function decays too slowly");
    }
    let frequency = y.abs() + x * x + 1.0;
    let nodes = (t_max * frequency * 8.0 / PI).ceil().max(4096.0) as usize;
    let dt = t_max / nodes as f64;
    // Trapezoid over [0, t_max]; the t = 0 term is cf(0) * cos(0) = 1.
    let mut acc = 0.5 * (1.0 + (imdd_cf(t_max, x, s1, s2)
        * Complex64::new(0.0, -t_max * y).exp())
    .re);
    for k in 1..nodes {
        let t = k as f64 * dt;
        acc += (imdd_cf(t, x, s1, s2) * Complex64::new(0.0, -t * y).exp()).re;
    }
    acc * dt / PI
}

// ---------------------------------------------------------------------------
// Plain posteriors (log domain)
// ---------------------------------------------------------------------------

/// max-subtracted log(sum(exp(..))); -inf entries are transparent.
pub fn log_sum_exp_f64(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// ln Q(m|y) for every symbol, from log-likelihoods and log-priors.
/// Entries with zero prior may be -inf; the result is finite wherever the
/// prior-weighted likelihood is non-zero.
pub fn log_posteriors(log_liks: &[f64], ln_priors: &[f64]) -> Result<Vec<f64>, DemapperError> {
    assert_eq!(log_liks.len(), ln_priors.len());
    let s: Vec<f64> = log_liks
        .iter()
        .zip(ln_priors)
        .map(|(&ll, &lp)| ll + lp)
        .collect();
    let lse = log_sum_exp_f64(&s);
    if !lse.is_finite() {
        return Err(DemapperError::DegeneratePosterior);
    }
    Ok(s.iter().map(|&v| v - lse).collect())
}

/// Symbol posteriors plus, for every bit position, the posterior pair
/// [P(bit = 0 | y), P(bit = 1 | y)].
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorRow {
    pub symbol: Vec<f64>,
    pub bit: Vec<[f64; 2]>,
}

/// Bayes combination of likelihoods and priors. Bit posteriors are formed by
/// summing symbol posteriors over the points whose label carries that bit,
/// so each pair sums to the same total as the symbol row (one).
pub fn posterior_row(
    log_liks: &[f64],
    priors: &[f64],
    labels: &[u32],
    bits_per_symbol: u32,
) -> Result<PosteriorRow, DemapperError> {
    assert_eq!(log_liks.len(), labels.len());
    let ln_priors: Vec<f64> = priors.iter().map(|&p| p.ln()).collect();
    let log_post = log_posteriors(log_liks, &ln_priors)?;
    let symbol: Vec<f64> = log_post.iter().map(|&v| v.exp()).collect();
    let mut bit = vec![[0.0; 2]; bits_per_symbol as usize];
    for (j, &post) in symbol.iter().enumerate() {
        for k in 0..bits_per_symbol {
            let b = (labels[j] >> (bits_per_symbol - 1 - k)) & 1;
            bit[k as usize][b as usize] += post;
        }
    }
    Ok(PosteriorRow { symbol, bit })
}

// ---------------------------------------------------------------------------
// On-tape posteriors
// ---------------------------------------------------------------------------

/// Per-sample posterior terms recorded on the tape: log2 Q(x_n | y_n) for
/// the transmitted symbol, and (when bit labels are supplied) the sum over
/// bit positions of log2 Q(b_n^k | y_n).
pub struct TapePosteriors<'t> {
    pub symbol_log2: Vec<Var<'t>>,
    pub bit_log2_sum: Option<Vec<Var<'t>>>,
}

/// Finishes one sample: total normalizer, transmitted-symbol log2 posterior,
/// optional summed bit log2 posteriors.
fn finish_sample<'t>(
    tape: &'t Tape,
    scores: &[Var<'t>],
    sent: usize,
    bit_labels: Option<(&[u32], u32)>,
    subset: &mut Vec<Var<'t>>,
) -> Result<(Var<'t>, Option<Var<'t>>), AdError> {
    let lse_all = log_sum_exp(tape, scores)?;
    let sym = (scores[sent] - lse_all) * LOG2_E;
    let bits = match bit_labels {
        None => None,
        Some((labels, k_bits)) => {
            let mut acc: Option<Var<'t>> = None;
            for k in 0..k_bits {
                let shift = k_bits - 1 - k;
                let b = (labels[sent] >> shift) & 1;
                subset.clear();
                for (j, &s) in scores.iter().enumerate() {
                    if (labels[j] >> shift) & 1 == b {
                        subset.push(s);
                    }
                }
                let term = log_sum_exp(tape, subset)? - lse_all;
                acc = Some(match acc {
                    None => term,
                    Some(a) => a + term,
                });
            }
            Some(acc.expect("at least one bit per symbol") * LOG2_E)
        }
    };
    Ok((sym, bits))
}

/// Records matched AWGN posteriors for a batch. `ctilde` may carry gradient
/// (average-power normalization) or be lifted constants; either way the
/// normalizing constant of the Gaussian cancels inside the posterior and is
/// omitted.
pub fn awgn_log2_posteriors<'t>(
    tape: &'t Tape,
    y: &[ComplexVar<'t>],
    ctilde: &[ComplexVar<'t>],
    ln_priors: &[Var<'t>],
    sigma2_total: f64,
    indices: &[usize],
    bit_labels: Option<(&[u32], u32)>,
) -> Result<TapePosteriors<'t>, AdError> {
    assert_eq!(ctilde.len(), ln_priors.len());
    assert_eq!(y.len(), indices.len());
    let m = ctilde.len();
    let neg_inv = -1.0 / sigma2_total;
    let mut scores = Vec::with_capacity(m);
    let mut subset = Vec::with_capacity(m);
    let mut symbol_log2 = Vec::with_capacity(y.len());
    let mut bit_log2_sum = bit_labels.map(|_| Vec::with_capacity(y.len()));
    for (n, yn) in y.iter().enumerate() {
        scores.clear();
        for j in 0..m {
            let dre = yn.re - ctilde[j].re;
            let dim = yn.im - ctilde[j].im;
            let d2 = dre.square() + dim.square();
            scores.push(d2 * neg_inv + ln_priors[j]);
        }
        let (sym, bits) = finish_sample(tape, &scores, indices[n], bit_labels, &mut subset)?;
        symbol_log2.push(sym);
        if let (Some(list), Some(b)) = (bit_log2_sum.as_mut(), bits) {
            list.push(b);
        }
    }
    Ok(TapePosteriors {
        symbol_log2,
        bit_log2_sum,
    })
}

/// Records matched square-law-detection posteriors for a batch.
///
/// The likelihood quadrature is the same folded-Gaussian rule as
/// [`imdd_likelihood`], recorded on the tape in the log domain. The grid for
/// symbol j is u_k = t_k * (x_j + 8*sigma1) with t_k fixed fractions, so the
/// grid itself moves with x_j and the recorded function is exactly the
/// quadrature value; its gradient therefore matches finite differences of a
/// re-run to rounding error. Grid quantities depend only on the symbol and
/// are recorded once per symbol, not once per sample.
pub fn imdd_log2_posteriors<'t>(
    tape: &'t Tape,
    y: &[Var<'t>],
    xtilde: &[Var<'t>],
    ln_priors: &[Var<'t>],
    params: &ImddParams,
    quad_nodes: usize,
    indices: &[usize],
    bit_labels: Option<(&[u32], u32)>,
) -> Result<TapePosteriors<'t>, AdError> {
    assert_eq!(xtilde.len(), ln_priors.len());
    assert_eq!(y.len(), indices.len());
    assert!(quad_nodes >= 8, "need at least eight quadrature nodes");
    let m = xtilde.len();
    let q = quad_nodes;
    let (s1, s2) = (params.sigma1, params.sigma2);
    let inv2s1 = -0.5 / (s1 * s1);
    let inv2s2 = -0.5 / (s2 * s2);
    let ln_norm = -(s1.ln() + s2.ln() + (2.0 * PI).ln());

    struct SymbolGrid<'t> {
        u_sq: Vec<Var<'t>>,
        ln_field: Vec<Var<'t>>,
        ln_du: Var<'t>,
    }
    let mut grids = Vec::with_capacity(m);
    for j in 0..m {
        let xj = xtilde[j];
        let span = xj + 8.0 * s1;
        let ln_du = span.ln()? - ((q - 1) as f64).ln();
        let mut u_sq = Vec::with_capacity(q);
        let mut ln_field = Vec::with_capacity(q);
        for k in 0..q {
            let t = k as f64 / (q - 1) as f64;
            let u = span * t;
            let a = (u - xj).square() * inv2s1;
            let b = (u + xj).square() * inv2s1;
            let folded = log_sum_exp(tape, &[a, b])?;
            let ln_w = if k == 0 || k == q - 1 { -LN_2 } else { 0.0 };
            ln_field.push(folded + (ln_norm + ln_w));
            u_sq.push(u.square());
        }
        grids.push(SymbolGrid {
            u_sq,
            ln_field,
            ln_du,
        });
    }

    let mut scores = Vec::with_capacity(m);
    let mut subset = Vec::with_capacity(m);
    let mut terms = Vec::with_capacity(q);
    let mut symbol_log2 = Vec::with_capacity(y.len());
    let mut bit_log2_sum = bit_labels.map(|_| Vec::with_capacity(y.len()));
    for (n, &yn) in y.iter().enumerate() {
        scores.clear();
        for (j, grid) in grids.iter().enumerate() {
            terms.clear();
            for k in 0..q {
                let d = yn - grid.u_sq[k];
                terms.push(grid.ln_field[k] + d.square() * inv2s2);
            }
            let ln_lik = log_sum_exp(tape, &terms)? + grid.ln_du;
            scores.push(ln_lik + ln_priors[j]);
        }
        let (sym, bits) = finish_sample(tape, &scores, indices[n], bit_labels, &mut subset)?;
        symbol_log2.push(sym);
        if let (Some(list), Some(b)) = (bit_log2_sum.as_mut(), bits) {
            list.push(b);
        }
    }
    Ok(TapePosteriors {
        symbol_log2,
        bit_log2_sum,
    })
}
