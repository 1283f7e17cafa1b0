//! Constellation geometry, Gray bit-labels, power normalization, and the
//! Maxwell-Boltzmann distribution family over a constellation's energies.
//!
//! Points are fixed complex numbers; only their probabilities are learned.
//! Square QAM uses the odd-integer grid with per-axis binary-reflected Gray
//! labels, in-phase bits first. The intensity-modulation ladder places point
//! i at sqrt(0.1 + i), so the squared amplitudes step linearly away from a
//! small non-zero floor.

use crate::distribution::{DistributionError, ProbabilityVector};
use num_complex::Complex64;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstellationError {
    #[error("unsupported {kind} order {m}")]
    UnsupportedOrder { kind: &'static str, m: usize },
    #[error("constellation has zero power under the given distribution; cannot normalize")]
    DegenerateConstellation,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationKind {
    Qam,
    Pam,
    ImddPam,
}

impl ConstellationKind {
    fn name(self) -> &'static str {
        match self {
            ConstellationKind::Qam => "qam",
            ConstellationKind::Pam => "pam",
            ConstellationKind::ImddPam => "imdd-pam",
        }
    }
}

/// Fixed set of points with one bit-label per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    bits_per_symbol: u32,
}

/// Binary-reflected Gray code.
fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

fn is_power_of_two(m: usize) -> bool {
    m != 0 && m & (m - 1) == 0
}

impl Constellation {
    /// Square QAM of order 4, 16, 64, 256 or 1024. Per-axis amplitudes are
    /// the odd integers centered on zero; the label is the Gray code of the
    /// in-phase level followed by the Gray code of the quadrature level.
    pub fn qam(m: usize) -> Result<Self, ConstellationError> {
        let err = || ConstellationError::UnsupportedOrder { kind: "qam", m };
        if !matches!(m, 4 | 16 | 64 | 256 | 1024) {
            return Err(err());
        }
        let l = (m as f64).sqrt().round() as usize;
        let bits_per_axis = l.trailing_zeros();
        let mut points = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for i in 0..l {
            let re = (2 * i) as f64 - (l - 1) as f64;
            for q in 0..l {
                let im = (2 * q) as f64 - (l - 1) as f64;
                points.push(Complex64::new(re, im));
                labels.push(gray(i as u32) << bits_per_axis | gray(q as u32));
            }
        }
        Ok(Constellation {
            kind: ConstellationKind::Qam,
            points,
            labels,
            bits_per_symbol: 2 * bits_per_axis,
        })
    }

    /// Real PAM on the odd-integer grid with a Gray labeling along the axis.
    pub fn pam(m: usize) -> Result<Self, ConstellationError> {
        if !is_power_of_two(m) || m < 2 || m > 1024 {
            return Err(ConstellationError::UnsupportedOrder { kind: "pam", m });
        }
        let points = (0..m)
            .map(|i| Complex64::new((2 * i) as f64 - (m - 1) as f64, 0.0))
            .collect();
        let labels = (0..m).map(|i| gray(i as u32)).collect();
        Ok(Constellation {
            kind: ConstellationKind::Pam,
            points,
            labels,
            bits_per_symbol: m.trailing_zeros(),
        })
    }

    /// Positive-amplitude ladder for square-law direct-detection links:
    /// point i sits at sqrt(0.1 + i), Gray-labeled in ascending order.
    pub fn imdd_pam(m: usize) -> Result<Self, ConstellationError> {
        if !is_power_of_two(m) || m < 2 || m > 1024 {
            return Err(ConstellationError::UnsupportedOrder { kind: "imdd-pam", m });
        }
        let points = (0..m)
            .map(|i| Complex64::new((0.1 + i as f64).sqrt(), 0.0))
            .collect();
        let labels = (0..m).map(|i| gray(i as u32)).collect();
        Ok(Constellation {
            kind: ConstellationKind::ImddPam,
            points,
            labels,
            bits_per_symbol: m.trailing_zeros(),
        })
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Bit `k` of point `m`'s label, k = 0 being the first (most
    /// significant) bit.
    pub fn label_bit(&self, m: usize, k: u32) -> u8 {
        debug_assert!(k < self.bits_per_symbol);
        ((self.labels[m] >> (self.bits_per_symbol - 1 - k)) & 1) as u8
    }

    /// |c_m|^2 for every point.
    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|c| c.norm_sqr()).collect()
    }

    /// True when all points are real with strictly positive amplitude, the
    /// shape square-law detection needs.
    pub fn is_positive_real(&self) -> bool {
        self.points.iter().all(|c| c.im == 0.0 && c.re > 0.0)
    }
}

// JSON shape: {"kind": ..., "m": ..., "points": [[re, im], ...],
// "labels": ["0110", ...]} with labels as fixed-width bitstrings.
impl Serialize for Constellation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct Points<'a>(&'a [Complex64]);
        impl Serialize for Points<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.len()))?;
                for c in self.0 {
                    seq.serialize_element(&[c.re, c.im])?;
                }
                seq.end()
            }
        }
        let labels: Vec<String> = self
            .labels
            .iter()
            .map(|&l| {
                let w = self.bits_per_symbol as usize;
                format!("{l:0w$b}")
            })
            .collect();
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("kind", self.kind.name())?;
        map.serialize_entry("m", &self.size())?;
        map.serialize_entry("points", &Points(&self.points))?;
        map.serialize_entry("labels", &labels)?;
        map.end()
    }
}

/// Power constraint applied when scaling a constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormConstraint {
    /// Divide by sqrt(sum p_m |c_m|^2): unit average energy under p.
    AveragePower,
    /// Divide by max |c_m|: unit peak amplitude, independent of p.
    PeakPower,
    /// Leave the points untouched.
    None,
}

/// A constellation after scaling, remembering what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedConstellation {
    pub points: Vec<Complex64>,
    pub constraint: NormConstraint,
    pub scale: f64,
}

/// Scales `c` under `constraint`. Average power uses the distribution `p`;
/// the other two ignore it.
pub fn normalize(
    c: &Constellation,
    p: &ProbabilityVector,
    constraint: NormConstraint,
) -> Result<NormalizedConstellation, ConstellationError> {
    assert_eq!(c.size(), p.len(), "distribution dimension mismatch");
    let scale = match constraint {
        NormConstraint::AveragePower => {
            let power: f64 = c
                .points
                .iter()
                .zip(p.as_slice())
                .map(|(cm, &pm)| pm * cm.norm_sqr())
                .sum();
            if power <= 0.0 {
                return Err(ConstellationError::DegenerateConstellation);
            }
            power.sqrt()
        }
        NormConstraint::PeakPower => {
            let peak = c.points.iter().map(|cm| cm.norm()).fold(0.0, f64::max);
            if peak <= 0.0 {
                return Err(ConstellationError::DegenerateConstellation);
            }
            peak
        }
        NormConstraint::None => 1.0,
    };
    Ok(NormalizedConstellation {
        points: c.points.iter().map(|cm| cm / scale).collect(),
        constraint,
        scale,
    })
}

/// Maxwell-Boltzmann distribution p_m proportional to exp(-nu |c_m|^2),
/// nu >= 0. nu = 0 is uniform; large nu concentrates on the lowest-energy
/// points. Energies are shifted by their minimum before exponentiating so
/// large nu cannot underflow everything to zero.
pub fn mb_distribution(
    c: &Constellation,
    nu: f64,
) -> Result<ProbabilityVector, ConstellationError> {
    assert!(nu >= 0.0 && nu.is_finite(), "nu must be finite and >= 0");
    let energies = c.energies();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let masses: Vec<f64> = energies.iter().map(|&e| (-nu * (e - e_min)).exp()).collect();
    Ok(ProbabilityVector::from_masses(masses)?)
}

/// Finds nu such that the Maxwell-Boltzmann entropy hits `target_bits`, by
/// bisection on the (strictly decreasing) entropy-versus-nu curve. Targets
/// at or above log2(M) return nu = 0; targets below the entropy floor of the
/// family saturate at the bracketing endpoint.
pub fn mb_nu_for_entropy(c: &Constellation, target_bits: f64) -> Result<f64, ConstellationError> {
    assert!(target_bits.is_finite() && target_bits >= 0.0);
    let m = c.size() as f64;
    if target_bits >= m.log2() {
        return Ok(0.0);
    }
    let energies = c.energies();
    let mean_energy: f64 = energies.iter().sum::<f64>() / m;
    let entropy = |nu: f64| -> f64 { mb_distribution(c, nu).unwrap().entropy_bits() };

    let mut hi = 1.0 / mean_energy.max(1e-300);
    let mut grow = 0;
    while entropy(hi) > target_bits {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            // Entropy floor of the family is above the target.
            return Ok(hi);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy(mid) > target_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
