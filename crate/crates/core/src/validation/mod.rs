//! Ground-truth metrics and baselines the learned distributions are judged
//! against: quadrature and Monte Carlo rate estimators, the
//! Maxwell-Boltzmann scan, Blahut-Arimoto capacity, Shannon capacity, and
//! the frozen-batch gradient-exactness harness.

pub mod ba;
pub mod gradcheck;
pub mod mb;
pub mod mc;
pub mod quadrature;

pub use ba::{awgn_real_likelihood_matrix, blahut_arimoto, imdd_likelihood_matrix, BaResult};
pub use gradcheck::{gradient_exactness_check, GradientCheckReport};
pub use mb::{mb_scan, MbScanResult};
pub use mc::{mc_metric, plain_batch_rate, ImddDensityTable, McEstimate};
pub use quadrature::{
    gauss_hermite, gh_bmi_awgn, gh_mi_awgn, trapz_bmi_imdd, trapz_mi_imdd, GaussHermite,
    QuadratureSpec,
};

use crate::constellation::ConstellationError;
use crate::distribution::DistributionError;
use crate::trainer::TrainerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("quadrature needs at least 16 nodes per dimension, got {nodes}")]
    TooFewQuadratureNodes { nodes: usize },
    #[error("{points} constellation points but {probabilities} probabilities")]
    DimensionMismatch { points: usize, probabilities: usize },
    #[error("sampled estimate needs at least one sample and a usable distribution")]
    NoSamples,
    #[error("square-law channel needs strictly positive real amplitudes")]
    NeedsPositiveAmplitudes,
    #[error("likelihood matrix is empty")]
    EmptyLikelihoodMatrix,
    #[error("likelihood matrix row {row} has a different length than row 0")]
    RaggedLikelihoodMatrix { row: usize },
    #[error("likelihood matrix row {row} has negative, non-finite, or zero-mass entries")]
    InvalidLikelihoodRow { row: usize },
    #[error(
        "no convergence in {iterations} iterations; last capacity {capacity_bits} bits"
    )]
    Convergence {
        iterations: usize,
        capacity_bits: f64,
        distribution: Vec<f64>,
    },
    #[error("scan grid needs nu_max > 0 and at least 3 points, got nu_max {nu_max}, {grid_points} points")]
    InvalidScanGrid { grid_points: usize, nu_max: f64 },
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
}

/// Capacity of the complex Gaussian channel in bits per symbol at the
/// given linear signal-to-noise ratio.
pub fn shannon_capacity(esn0_linear: f64) -> f64 {
    assert!(esn0_linear > 0.0, "signal-to-noise ratio must be positive");
    (1.0 + esn0_linear).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_closed_form_values() {
        assert!((shannon_capacity(1.0) - 1.0).abs() < 1e-15);
        assert!((shannon_capacity(3.0) - 2.0).abs() < 1e-15);
        let esn0 = 10.0f64.powf(18.0 / 10.0);
        assert!((shannon_capacity(esn0) - 6.0017).abs() < 1e-3);
    }
}
