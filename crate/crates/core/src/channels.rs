//! Channel models: complex AWGN and a square-law direct-detection link.
//!
//! Conventions fixed here and relied on everywhere else:
//! - AWGN noise power `sigma2` is the TOTAL complex variance N0, split
//!   evenly across the two real dimensions. With a unit-average-energy
//!   constellation, Es/N0 in dB maps to sigma2 = 10^(-esn0_db/10).
//! - The direct-detection channel computes y = (x + n1)^2 + n2 with n1 a
//!   real Gaussian of std sigma1 added to the (real, positive) amplitude
//!   before the square-law detector, and n2 of std sigma2 after it.
//!
//! On-tape transmit functions fold freshly drawn noise in as constants, so
//! gradients flow through the channel into the input (dy/dx = 1 for AWGN,
//! dy/dx = 2(x + n1) for the square-law detector) while the realization
//! itself stays fixed. The `_with` variants accept a pre-drawn noise slice,
//! which is what lets a gradient check re-run an identical batch.

use crate::autodiff::{AdError, ComplexVar, Var};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("noise parameter {name} is {value}, expected a finite value > 0")]
    InvalidNoise { name: &'static str, value: f64 },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// Complex AWGN operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwgnParams {
    pub esn0_db: f64,
}

impl AwgnParams {
    pub fn new(esn0_db: f64) -> Result<Self, ChannelError> {
        if !esn0_db.is_finite() {
            return Err(ChannelError::InvalidNoise {
                name: "esn0_db",
                value: esn0_db,
            });
        }
        Ok(AwgnParams { esn0_db })
    }

    /// Total complex noise variance N0 for a unit-energy constellation.
    pub fn sigma2_total(&self) -> f64 {
        10f64.powf(-self.esn0_db / 10.0)
    }

    pub fn esn0_linear(&self) -> f64 {
        10f64.powf(self.esn0_db / 10.0)
    }
}

/// Square-law direct-detection operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImddParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ImddParams {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self, ChannelError> {
        for (name, value) in [("sigma1", sigma1), ("sigma2", sigma2)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ChannelError::InvalidNoise { name, value });
            }
        }
        Ok(ImddParams { sigma1, sigma2 })
    }
}

/// One complex AWGN noise sample with total variance `sigma2_total`.
pub fn awgn_noise<R: Rng>(sigma2_total: f64, rng: &mut R) -> Complex64 {
    let std_per_dim = (sigma2_total / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std_per_dim, im * std_per_dim)
}

pub fn draw_awgn_noise<R: Rng>(n: usize, sigma2_total: f64, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| awgn_noise(sigma2_total, rng)).collect()
}

/// Plain-arithmetic channel use, for Monte Carlo validation paths.
pub fn awgn_sample<R: Rng>(x: Complex64, sigma2_total: f64, rng: &mut R) -> Complex64 {
    x + awgn_noise(sigma2_total, rng)
}

/// (n1, n2) pair for one square-law detection.
pub fn draw_imdd_noise<R: Rng>(n: usize, params: &ImddParams, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            (n1 * params.sigma1, n2 * params.sigma2)
        })
        .collect()
}

pub fn imdd_sample<R: Rng>(x: f64, params: &ImddParams, rng: &mut R) -> f64 {
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    let field = x + n1 * params.sigma1;
    field * field + n2 * params.sigma2
}

/// y_n = x_n + noise_n on the tape, noise entering as constants.
pub fn awgn_transmit_with<'t>(
    x: &[ComplexVar<'t>],
    noise: &[Complex64],
) -> Vec<ComplexVar<'t>> {
    assert_eq!(x.len(), noise.len(), "one noise sample per input");
    x.iter()
        .zip(noise)
        .map(|(xv, n)| ComplexVar {
            re: xv.re + n.re,
            im: xv.im + n.im,
        })
        .collect()
}

pub fn awgn_transmit<'t, R: Rng>(
    x: &[ComplexVar<'t>],
    params: &AwgnParams,
    rng: &mut R,
) -> Vec<ComplexVar<'t>> {
    let noise = draw_awgn_noise(x.len(), params.sigma2_total(), rng);
    awgn_transmit_with(x, &noise)
}

/// y_n = (x_n + n1_n)^2 + n2_n on the tape.
pub fn imdd_transmit_with<'t>(x: &[Var<'t>], noise: &[(f64, f64)]) -> Vec<Var<'t>> {
    assert_eq!(x.len(), noise.len(), "one noise pair per input");
    x.iter()
        .zip(noise)
        .map(|(&xv, &(n1, n2))| (xv + n1).square() + n2)
        .collect()
}

pub fn imdd_transmit<'t, R: Rng>(
    x: &[Var<'t>],
    params: &ImddParams,
    rng: &mut R,
) -> Vec<Var<'t>> {
    let noise = draw_imdd_noise(x.len(), params, rng);
    imdd_transmit_with(x, &noise)
}
