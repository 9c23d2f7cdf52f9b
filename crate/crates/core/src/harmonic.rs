//! Domain types and closed-form Fourier analysis of the quarter-wave
//! symmetric three-level SHE waveform.
//!
//! For switching angles `0 < θ1 < … < θp < π/2` the output voltage is odd and
//! half-wave antisymmetric, so only odd sine harmonics survive:
//!
//! ```text
//! b_n = 4V/(nπ) · Σ_{i=1..p} (-1)^(i+1) cos(n θ_i),   n odd
//! ```
//!
//! Even ranks are exactly zero in this model and are stored as such.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::compensated_sum;

/// Default truncation rank for THD.
pub const DEFAULT_THD_N_MAX: u32 = 49;

/// Ordered quarter-wave switching angles in radians.
///
/// Construction enforces `p >= 1` and `0 < θ1 < θ2 < … < θp < π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SwitchingAngleSet(Vec<f64>);

impl SwitchingAngleSet {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        validate_ordering(&angles).map_err(Error::InvalidAngles)?;
        Ok(Self(angles))
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        Self::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_degrees(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.to_degrees()).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SwitchingAngleSet {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SwitchingAngleSet> for Vec<f64> {
    fn from(value: SwitchingAngleSet) -> Self {
        value.0
    }
}

/// Checks `0 < θ1 < … < θp < π/2`, returning a description of the first
/// violation.
pub(crate) fn validate_ordering(angles: &[f64]) -> std::result::Result<(), String> {
    if angles.is_empty() {
        return Err("at least one angle is required".into());
    }
    if let Some((i, a)) = angles.iter().enumerate().find(|(_, a)| !a.is_finite()) {
        return Err(format!("angle {} is not finite ({a})", i + 1));
    }
    if angles[0] <= 0.0 {
        return Err(format!("theta1 = {} rad must be positive", angles[0]));
    }
    let last = angles[angles.len() - 1];
    if last >= FRAC_PI_2 {
        return Err(format!(
            "theta{} = {}° must be below 90°",
            angles.len(),
            last.to_degrees()
        ));
    }
    for (i, w) in angles.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(format!(
                "angles must be strictly increasing (theta{} = {}° >= theta{} = {}°)",
                i + 1,
                w[0].to_degrees(),
                i + 2,
                w[1].to_degrees()
            ));
        }
    }
    Ok(())
}

/// Amplitudes `b_n` keyed by harmonic rank, always including the fundamental.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    entries: BTreeMap<u32, f64>,
}

impl HarmonicSpectrum {
    pub fn new(entries: BTreeMap<u32, f64>) -> Result<Self> {
        if entries.contains_key(&0) {
            return Err(Error::InvalidRank(0));
        }
        if !entries.contains_key(&1) {
            return Err(Error::InvalidProblem(
                "spectrum must contain the fundamental (n = 1)".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn fundamental(&self) -> f64 {
        self.entries[&1]
    }

    /// Amplitude at rank `n`; ranks not present read as zero.
    pub fn amplitude(&self, n: u32) -> f64 {
        self.entries.get(&n).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> &BTreeMap<u32, f64> {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(&n, &b)| (n, b))
    }

    pub fn max_rank(&self) -> u32 {
        *self
            .entries
            .keys()
            .next_back()
            .expect("fundamental is present")
    }

    /// Returns a copy with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(&n, &b)| (n, b * factor))
                .collect(),
        }
    }
}

fn check_odd_rank(n: u32) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::InvalidRank(n));
    }
    Ok(())
}

/// Alternating cosine sum `Σ (-1)^(i+1) cos(n θ_i)` over raw angles.
pub(crate) fn alternating_cos_sum(theta: &[f64], n: f64) -> f64 {
    compensated_sum(theta.iter().enumerate().map(|(i, &t)| {
        let c = (n * t).cos();
        if i % 2 == 0 {
            c
        } else {
            -c
        }
    }))
}

/// Sine amplitude of odd harmonic `n` for DC level `dc_voltage`.
pub fn evaluate_bn(angles: &SwitchingAngleSet, dc_voltage: f64, n: u32) -> Result<f64> {
    check_odd_rank(n)?;
    Ok(bn_unchecked(angles.as_slice(), dc_voltage, n))
}

fn bn_unchecked(theta: &[f64], dc_voltage: f64, n: u32) -> f64 {
    let n = f64::from(n);
    4.0 * dc_voltage / (n * PI) * alternating_cos_sum(theta, n)
}

pub fn fundamental_amplitude(angles: &SwitchingAngleSet, dc_voltage: f64) -> f64 {
    bn_unchecked(angles.as_slice(), dc_voltage, 1)
}

/// Spectrum for every rank `1..=n_max`; even ranks are recorded as exactly 0.
pub fn analytic_spectrum(
    angles: &SwitchingAngleSet,
    dc_voltage: f64,
    n_max: u32,
) -> Result<HarmonicSpectrum> {
    if n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be at least 1".into()));
    }
    let entries = (1..=n_max)
        .map(|n| {
            let b = if n % 2 == 1 {
                bn_unchecked(angles.as_slice(), dc_voltage, n)
            } else {
                0.0
            };
            (n, b)
        })
        .collect();
    HarmonicSpectrum::new(entries)
}

/// Voltage THD truncated at `n_max`: `sqrt(Σ_{h=2..n_max} (b_h / b_1)^2)`.
///
/// `n_max < 2` yields an empty sum and therefore zero.
pub fn thd(spectrum: &HarmonicSpectrum, n_max: u32) -> Result<f64> {
    let fundamental = spectrum.fundamental();
    if fundamental == 0.0 || !fundamental.is_finite() {
        return Err(Error::ZeroFundamental);
    }
    let sum_sq = compensated_sum(spectrum.iter().filter(|&(n, _)| n >= 2 && n <= n_max).map(
        |(_, b)| {
            let r = b / fundamental;
            r * r
        },
    ));
    Ok(sum_sq.sqrt())
}
