//! Exponential-family baseline: scan the single-parameter family
//! p_m proportional to exp(-nu |c_m|^2) for the member with the highest
//! quadrature-validated rate. This is the classical near-optimal shaping
//! family for the Gaussian channel and serves as the yardstick the learned
//! distributions are compared against.

use super::quadrature::{gh_mi_awgn, QuadratureSpec};
use super::ValidationError;
use crate::constellation::{mb_distribution, normalize, Constellation, NormConstraint};
use crate::distribution::ProbabilityVector;

/// Best family member found by [`mb_scan`].
#[derive(Debug, Clone)]
pub struct MbScanResult {
    pub nu: f64,
    pub mi_bits: f64,
    pub distribution: ProbabilityVector,
    /// True when the grid argmax sits at the upper end of the scanned
    /// range: the reported optimum is then only a range endpoint and the
    /// caller should widen the grid. The lower end is not flagged --
    /// nu = 0 (uniform) is a legitimate optimum at high SNR.
    pub boundary_warning: bool,
}

/// Grid scan over nu in [0, nu_max] followed by golden-section refinement
/// around the grid argmax. Every candidate is re-normalized to unit
/// average power under its own distribution before evaluation, so the
/// comparison is at equal transmit power.
pub fn mb_scan(
    c: &Constellation,
    sigma2_total: f64,
    nu_max: f64,
    grid_points: usize,
    spec: &QuadratureSpec,
) -> Result<MbScanResult, ValidationError> {
    if grid_points < 3 || !nu_max.is_finite() || nu_max <= 0.0 {
        return Err(ValidationError::InvalidScanGrid {
            grid_points,
            nu_max,
        });
    }
    let mut evaluate = |nu: f64| -> Result<f64, ValidationError> {
        let p = mb_distribution(c, nu)?;
        let norm = normalize(c, &p, NormConstraint::AveragePower)?;
        Ok(gh_mi_awgn(&norm.points, p.as_slice(), sigma2_total, spec))
    };

    let step = nu_max / (grid_points - 1) as f64;
    let mut best_i = 0;
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..grid_points {
        let value = evaluate(i as f64 * step)?;
        if value > best_value {
            best_value = value;
            best_i = i;
        }
    }
    let boundary_warning = best_i == grid_points - 1;

    // Refine inside the bracket around the argmax; keep whichever of the
    // grid optimum and the refined point is better, so the result never
    // falls below any scanned grid value.
    let lo = step * best_i.saturating_sub(1) as f64;
    let hi = step * (best_i + 1).min(grid_points - 1) as f64;
    let (mut nu, mut mi) = (step * best_i as f64, best_value);
    let (refined_nu, refined_mi) = golden_max(lo, hi, 48, &mut evaluate)?;
    if refined_mi > mi {
        nu = refined_nu;
        mi = refined_mi;
    }

    Ok(MbScanResult {
        nu,
        mi_bits: mi,
        distribution: mb_distribution(c, nu)?,
        boundary_warning,
    })
}

fn golden_max<E>(
    mut lo: f64,
    mut hi: f64,
    iters: usize,
    f: &mut impl FnMut(f64) -> Result<f64, E>,
) -> Result<(f64, f64), E> {
    let ratio = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}
