//! Probability vectors, sampling types, and per-symbol importance weights.
//!
//! Training never samples from the target distribution P directly. Each epoch
//! it builds the closest type with denominator N (every count at least 1) and
//! draws constant-composition batches from that type; the ratio W = P/Q
//! becomes the free parameter the optimizer moves.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("probability vector must not be empty")]
    Empty,
    #[error("entry {index} is {value}, expected a finite value >= 0")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, expected 1 within 1e-12")]
    NotNormalized { sum: f64 },
    #[error("cannot spread {m} symbols over {n} slots with at least one slot each")]
    InfeasibleApproximation { m: usize, n: usize },
    #[error("probability {index} is zero; the ratio is undefined")]
    DivisionByZeroProbability { index: usize },
    #[error("counts sum to {got}, expected {expected}")]
    CountMismatch { got: usize, expected: usize },
    #[error("count {index} is zero; every symbol must appear at least once")]
    ZeroCount { index: usize },
    #[error("weight {index} is {value}, expected a finite value > 0")]
    NonPositiveWeight { index: usize, value: f64 },
}

/// Point on the probability simplex: finite, non-negative entries summing to
/// one within 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = DistributionError;
    fn try_from(p: Vec<f64>) -> Result<Self, Self::Error> {
        ProbabilityVector::new(p)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Vec<f64> {
        p.0
    }
}

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self, DistributionError> {
        if p.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (index, &value) in p.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DistributionError::NegativeEntry { index, value });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(ProbabilityVector(p))
    }

    /// Normalizes a vector of non-negative masses.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self, DistributionError> {
        if masses.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (index, &value) in masses.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DistributionError::NegativeEntry { index, value });
            }
        }
        let sum: f64 = masses.iter().sum();
        if sum <= 0.0 {
            return Err(DistributionError::NotNormalized { sum });
        }
        let mut p: Vec<f64> = masses.iter().map(|&m| m / sum).collect();
        // One exact rescale pass keeps the checked invariant even when the
        // division rounds unluckily.
        let s2: f64 = p.iter().sum();
        if (s2 - 1.0).abs() > 1e-13 {
            p.iter_mut().for_each(|v| *v /= s2);
        }
        ProbabilityVector::new(p)
    }

    pub fn uniform(m: usize) -> Result<Self, DistributionError> {
        if m == 0 {
            return Err(DistributionError::Empty);
        }
        // 1/m sums back to 1 only up to rounding; make the last entry absorb
        // the residual so the invariant holds exactly.
        let mut p = vec![1.0 / m as f64; m];
        let partial: f64 = p[..m - 1].iter().sum();
        p[m - 1] = 1.0 - partial;
        ProbabilityVector::new(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Shannon entropy in bits; zero-probability entries contribute zero.
    pub fn entropy_bits(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }
}

/// Empirical type with denominator `total`: counts n_m with sum N and every
/// n_m >= 1, so each symbol appears in every batch and the induced
/// probabilities q_m = n_m/N are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeApproximation {
    counts: Vec<usize>,
    total: usize,
}

impl TypeApproximation {
    pub fn new(counts: Vec<usize>, total: usize) -> Result<Self, DistributionError> {
        if counts.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some(index) = counts.iter().position(|&c| c == 0) {
            return Err(DistributionError::ZeroCount { index });
        }
        let got: usize = counts.iter().sum();
        if got != total {
            return Err(DistributionError::CountMismatch {
                got,
                expected: total,
            });
        }
        Ok(TypeApproximation { counts, total })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// q_m = n_m / N.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Per-symbol importance weights w_m = p_m / q_m; strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, DistributionError> {
        if w.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (index, &value) in w.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(DistributionError::NonPositiveWeight { index, value });
            }
        }
        Ok(WeightVector(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Closest type with denominator `n` to `p` in total variation, subject to
/// every count being at least 1.
///
/// Greedy construction: start from max(1, floor(p_m * n)) and move single
/// units toward the largest absolute residual p_m - n_m/n until the counts
/// sum to n. Ties break toward the lowest index, which makes the result
/// deterministic. Unit moves are interchangeable under the L1 objective, so
/// the greedy endpoint attains the brute-force minimum (checked exhaustively
/// in the acceptance suite).
pub fn approximate_vd(
    p: &ProbabilityVector,
    n: usize,
) -> Result<TypeApproximation, DistributionError> {
    let m = p.len();
    if n < m {
        return Err(DistributionError::InfeasibleApproximation { m, n });
    }
    let nf = n as f64;
    let mut counts: Vec<usize> = p
        .as_slice()
        .iter()
        .map(|&pm| ((pm * nf).floor() as usize).max(1))
        .collect();
    let mut total: usize = counts.iter().sum();

    while total < n {
        // Add where the deficit p_m - n_m/N is largest.
        let mut best = 0usize;
        let mut best_residual = f64::NEG_INFINITY;
        for i in 0..m {
            let residual = p.get(i) - counts[i] as f64 / nf;
            if residual > best_residual {
                best_residual = residual;
                best = i;
            }
        }
        counts[best] += 1;
        total += 1;
    }
    while total > n {
        // Remove where the surplus is largest, never dropping a count to 0.
        let mut best = None;
        let mut best_residual = f64::INFINITY;
        for i in 0..m {
            if counts[i] <= 1 {
                continue;
            }
            let residual = p.get(i) - counts[i] as f64 / nf;
            if residual < best_residual {
                best_residual = residual;
                best = Some(i);
            }
        }
        let i = best.ok_or(DistributionError::InfeasibleApproximation { m, n })?;
        counts[i] -= 1;
        total -= 1;
    }

    TypeApproximation::new(counts, n)
}

/// w_m = p_m / q_m. Every q_m must be strictly positive.
pub fn weights_from(
    p: &ProbabilityVector,
    q: &[f64],
) -> Result<WeightVector, DistributionError> {
    assert_eq!(p.len(), q.len(), "dimension mismatch");
    let mut w = Vec::with_capacity(q.len());
    for (index, (&pm, &qm)) in p.as_slice().iter().zip(q).enumerate() {
        if qm <= 0.0 {
            return Err(DistributionError::DivisionByZeroProbability { index });
        }
        w.push(pm / qm);
    }
    // p_m = 0 would produce a zero weight; the constructor rejects it, which
    // is the correct contract: weights only exist for symbols that can occur.
    WeightVector::new(w)
}

/// p_m = w_m * q_m, validated back onto the simplex.
pub fn probs_from(
    w: &WeightVector,
    q: &[f64],
) -> Result<ProbabilityVector, DistributionError> {
    assert_eq!(w.len(), q.len(), "dimension mismatch");
    let p: Vec<f64> = w.as_slice().iter().zip(q).map(|(&wm, &qm)| wm * qm).collect();
    ProbabilityVector::new(p)
}

/// Uniformly random arrangement of the multiset holding exactly n_m copies of
/// symbol m: a constant-composition batch. Every permutation is equally
/// likely (Fisher-Yates under the supplied generator).
pub fn draw_batch<R: Rng>(t: &TypeApproximation, rng: &mut R) -> Vec<usize> {
    let mut indices = Vec::with_capacity(t.total());
    for (m, &c) in t.counts().iter().enumerate() {
        indices.extend(std::iter::repeat(m).take(c));
    }
    indices.shuffle(rng);
    indices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ExperimentRng;
    use rand::SeedableRng;

    /// Exhaustive minimizer of sum |p_m - n_m/N| over all compositions of N
    /// into strictly positive parts. Returns the minimal objective value.
    fn brute_force_vd(p: &[f64], n: usize) -> f64 {
        fn recurse(p: &[f64], left: usize, n: usize, acc: f64, best: &mut f64) {
            if p.len() == 1 {
                let obj = acc + (p[0] - left as f64 / n as f64).abs();
                if obj < *best {
                    *best = obj;
                }
                return;
            }
            // Leave at least one unit for each remaining symbol.
            for c in 1..=(left - (p.len() - 1)) {
                let obj = acc + (p[0] - c as f64 / n as f64).abs();
                if obj < *best {
                    recurse(&p[1..], left - c, n, obj, best);
                }
            }
        }
        let mut best = f64::INFINITY;
        recurse(p, n, n, 0.0, &mut best);
        best
    }

    fn objective(p: &[f64], t: &TypeApproximation) -> f64 {
        p.iter()
            .zip(t.probabilities())
            .map(|(&pm, qm)| (pm - qm).abs())
            .sum()
    }

    #[test]
    fn vd_two_symbols_even_split() {
        let p = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let t = approximate_vd(&p, 4).unwrap();
        assert_eq!(t.counts(), &[2, 2]);
    }

    #[test]
    fn vd_three_symbols_n10() {
        let p = ProbabilityVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let t = approximate_vd(&p, 10).unwrap();
        assert_eq!(t.counts(), &[7, 2, 1]);
    }

    // p = (0.65, 0.25, 0.10), N = 8: floors give (5, 2, 1) which already sums
    // to 8; the exhaustive oracle confirms no composition does better.
    #[test]
    fn vd_matches_brute_force_on_fixed_case() {
        let p = ProbabilityVector::new(vec![0.65, 0.25, 0.10]).unwrap();
        let t = approximate_vd(&p, 8).unwrap();
        assert_eq!(t.counts(), &[5, 2, 1]);
        let best = brute_force_vd(p.as_slice(), 8);
        assert!((objective(p.as_slice(), &t) - best).abs() < 1e-12);
    }

    #[test]
    fn vd_low_probability_symbol_keeps_one_slot() {
        let p = ProbabilityVector::new(vec![0.98, 0.02]).unwrap();
        let t = approximate_vd(&p, 8).unwrap();
        assert_eq!(t.counts(), &[7, 1]);
    }

    #[test]
    fn vd_rejects_more_symbols_than_slots() {
        let p = ProbabilityVector::uniform(5).unwrap();
        assert!(matches!(
            approximate_vd(&p, 4),
            Err(DistributionError::InfeasibleApproximation { m: 5, n: 4 })
        ));
    }

    #[test]
    fn vd_handles_overfull_floor_start() {
        // Floors plus the minimum-one rule start above N and must shed units
        // without dropping anybody to zero.
        let p = ProbabilityVector::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let t = approximate_vd(&p, 4).unwrap();
        assert_eq!(t.counts(), &[1, 1, 1, 1]);
        let best = brute_force_vd(p.as_slice(), 4);
        assert!((objective(p.as_slice(), &t) - best).abs() < 1e-12);
    }

    #[test]
    fn vd_matches_brute_force_on_random_simplex_points() {
        let mut rng = ExperimentRng::seed_from_u64(7);
        for _ in 0..200 {
            let m = 2 + (rng.gen::<u64>() % 3) as usize; // 2..=4
            let n = m + (rng.gen::<u64>() % 9) as usize; // m..=m+8
            let masses: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let p = ProbabilityVector::from_masses(masses).unwrap();
            let t = approximate_vd(&p, n).unwrap();
            let best = brute_force_vd(p.as_slice(), n);
            assert!(
                objective(p.as_slice(), &t) <= best + 1e-12,
                "p={:?} n={} counts={:?}",
                p.as_slice(),
                n,
                t.counts()
            );
        }
    }

    #[test]
    fn weights_identity_when_p_equals_q() {
        let p = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        let w = weights_from(&p, &[0.25, 0.75]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn probs_from_unit_weights_returns_q() {
        let w = WeightVector::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let q = [0.375, 0.125, 0.25, 0.25];
        let p = probs_from(&w, &q).unwrap();
        assert_eq!(p.as_slice(), &q);
    }

    #[test]
    fn weight_round_trip_is_tight() {
        let mut rng = ExperimentRng::seed_from_u64(11);
        for _ in 0..1000 {
            let m = 2 + (rng.gen::<u64>() % 7) as usize;
            let p = ProbabilityVector::from_masses(
                (0..m).map(|_| rng.gen::<f64>() + 1e-6).collect(),
            )
            .unwrap();
            let t = approximate_vd(&p, 4 * m).unwrap();
            let q = t.probabilities();
            let w = weights_from(&p, &q).unwrap();
            // (p/q)*q is within one rounding step of p, elementwise.
            for ((&wm, &qm), &pm) in w.as_slice().iter().zip(&q).zip(p.as_slice()) {
                let back = wm * qm;
                assert!((back - pm).abs() <= 2.0 * f64::EPSILON * pm.max(1e-300));
            }
        }
    }

    #[test]
    fn weights_reject_zero_q() {
        let p = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            weights_from(&p, &[0.5, 0.0]),
            Err(DistributionError::DivisionByZeroProbability { index: 1 })
        ));
    }

    #[test]
    fn draw_batch_is_a_permutation_of_the_type() {
        let t = TypeApproximation::new(vec![3, 2, 1], 6).unwrap();
        let mut rng = ExperimentRng::seed_from_u64(3);
        for _ in 0..50 {
            let batch = draw_batch(&t, &mut rng);
            assert_eq!(batch.len(), 6);
            let mut hist = [0usize; 3];
            for &m in &batch {
                hist[m] += 1;
            }
            assert_eq!(&hist[..], t.counts());
        }
    }

    #[test]
    fn draw_batch_positions_are_exchangeable() {
        // Symbol frequency at a fixed position should match q_m; 10^4 draws
        // give a multinomial standard error of about 0.005 per cell.
        let t = TypeApproximation::new(vec![2, 1, 1], 4).unwrap();
        let q = t.probabilities();
        let mut rng = ExperimentRng::seed_from_u64(40);
        let trials = 10_000;
        let mut hist = [0usize; 3];
        for _ in 0..trials {
            let batch = draw_batch(&t, &mut rng);
            hist[batch[0]] += 1;
        }
        for m in 0..3 {
            let freq = hist[m] as f64 / trials as f64;
            let se = (q[m] * (1.0 - q[m]) / trials as f64).sqrt();
            assert!(
                (freq - q[m]).abs() < 4.0 * se,
                "position-0 frequency {freq} vs q {}",
                q[m]
            );
        }
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(matches!(
            ProbabilityVector::new(vec![0.5, -0.5, 1.0]),
            Err(DistributionError::NegativeEntry { index: 1, .. })
        ));
        assert!(matches!(
            ProbabilityVector::new(vec![0.5, 0.6]),
            Err(DistributionError::NotNormalized { .. })
        ));
        let u = ProbabilityVector::uniform(7).unwrap();
        assert_eq!(u.as_slice().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn entropy_of_uniform_is_log2_m() {
        let u = ProbabilityVector::uniform(8).unwrap();
        assert!((u.entropy_bits() - 3.0).abs() < 1e-12);
        let point = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(point.entropy_bits(), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn vd_counts_always_valid(seed in 0u64..500, m in 2usize..6, extra in 0usize..20) {
            let mut rng = ExperimentRng::seed_from_u64(seed);
            let p = ProbabilityVector::from_masses(
                (0..m).map(|_| rng.gen::<f64>() + 1e-9).collect(),
            ).unwrap();
            let n = m + extra;
            let t = approximate_vd(&p, n).unwrap();
            proptest::prop_assert_eq!(t.counts().iter().sum::<usize>(), n);
            proptest::prop_assert!(t.counts().iter().all(|&c| c >= 1));
        }
    }
}
