//! Learning symbol probabilities for a fixed constellation by gradient ascent
//! on importance-sampled mutual-information estimators.
//!
//! The crate is organized around a small scalar reverse-mode autodiff tape
//! ([`autodiff`]). Each training batch records the whole forward pipeline on
//! the tape: per-symbol sampling weights enter as leaves, the constellation is
//! power-normalized, symbols pass through a noisy channel and a matched
//! demapper, and the batch loss (an importance-sampled MI or BMI estimate in
//! bits/symbol) comes out as a single scalar whose gradient with respect to
//! the weights is exact.
//!
//! Everything stochastic runs off a seeded, counter-based generator
//! (ChaCha8), so identical configurations reproduce identical results
//! bit-for-bit.

#![forbid(unsafe_code)]

pub mod autodiff;
pub mod channels;
pub mod constellation;
pub mod demappers;
pub mod distribution;
pub mod losses;
pub mod trainer;
pub mod validation;

/// The one random number generator used everywhere. ChaCha with 8 rounds:
/// seedable, portable across platforms, and its stream is stable across
/// releases of the implementing crate.
pub type ExperimentRng = rand_chacha::ChaCha8Rng;
