//! Time-domain synthesis of the three-level SHE output voltage and a
//! quadrature spectrum used to cross-check the closed-form coefficients.
//!
//! On the first quarter period, with `θ_0 = 0` and `θ_{p+1} = π/2`, the level
//! on `(θ_i, θ_{i+1})` is `+V` for odd `i` and `0` for even `i`. The second
//! quarter mirrors the first about `π/2` and the second half is the negation
//! of the first. Integrating `sin(nθ)` over the resulting pulses gives
//! `b_n = 4V/(nπ) Σ (-1)^(i+1) cos(nθ_i)`, so this is the waveform family
//! whose sine series matches [`crate::harmonic::evaluate_bn`] term by term.
//! Levels are right-continuous at switching instants.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonic::{HarmonicSpectrum, SwitchingAngleSet};

pub const DEFAULT_FREQUENCY: f64 = 50.0;
pub const DEFAULT_SAMPLES: usize = 1 << 16;
/// Sample count used when the numeric spectrum serves as an oracle.
pub const ORACLE_SAMPLES: usize = 1 << 20;
pub const MIN_SAMPLES: usize = 64;

/// Output voltage at phase `phase` (radians, any real value; reduced mod 2π).
pub fn level_at(angles: &SwitchingAngleSet, dc_voltage: f64, phase: f64) -> f64 {
    let phase = phase.rem_euclid(TAU);
    if phase >= PI {
        -half_wave_level(angles.as_slice(), dc_voltage, phase - PI)
    } else {
        half_wave_level(angles.as_slice(), dc_voltage, phase)
    }
}

fn half_wave_level(theta: &[f64], dc_voltage: f64, phase: f64) -> f64 {
    // Number of switching instants passed, counted so that the level is
    // right-continuous in `phase` on both quarters.
    let passed = if phase < FRAC_PI_2 {
        theta.partition_point(|&t| t <= phase)
    } else {
        let mirrored = PI - phase;
        theta.partition_point(|&t| t < mirrored)
    };
    if passed % 2 == 1 {
        dc_voltage
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSpec {
    pub angles: SwitchingAngleSet,
    pub dc_voltage: f64,
    pub frequency: f64,
    pub samples_per_period: usize,
}

impl WaveformSpec {
    pub fn new(angles: SwitchingAngleSet) -> Self {
        Self {
            angles,
            dc_voltage: 1.0,
            frequency: DEFAULT_FREQUENCY,
            samples_per_period: DEFAULT_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_period < MIN_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "need at least {MIN_SAMPLES} samples per period, got {}",
                self.samples_per_period
            )));
        }
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fundamental frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !(self.dc_voltage > 0.0) || !self.dc_voltage.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "DC voltage must be positive, got {}",
                self.dc_voltage
            )));
        }
        Ok(())
    }
}

/// One period of output voltage sampled at `t_k = k · T / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    period: f64,
    dc_voltage: f64,
    voltages: Vec<f64>,
}

impl Waveform {
    /// Builds a waveform from raw samples covering exactly one period.
    pub fn from_samples(period: f64, dc_voltage: f64, voltages: Vec<f64>) -> Result<Self> {
        if voltages.len() < MIN_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "need at least {MIN_SAMPLES} samples per period, got {}",
                voltages.len()
            )));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "period must be positive, got {period}"
            )));
        }
        Ok(Self {
            period,
            dc_voltage,
            voltages,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dc_voltage(&self) -> f64 {
        self.dc_voltage
    }

    pub fn len(&self) -> usize {
        self.voltages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltages.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.period / self.voltages.len() as f64
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    /// `(time, voltage)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.voltages
            .iter()
            .enumerate()
            .map(|(k, &v)| (self.time(k), v))
    }

    /// Fraction of samples at a nonzero level.
    pub fn conduction_fraction(&self) -> f64 {
        let on = self.voltages.iter().filter(|v| **v != 0.0).count();
        on as f64 / self.voltages.len() as f64
    }

    pub fn rms(&self) -> f64 {
        let sum_sq: f64 = self.voltages.iter().map(|v| v * v).sum();
        (sum_sq / self.voltages.len() as f64).sqrt()
    }

    /// Number of level changes over one period, counting the wrap-around.
    pub fn transition_count(&self) -> usize {
        let n = self.voltages.len();
        (0..n)
            .filter(|&k| self.voltages[k] != self.voltages[(k + 1) % n])
            .count()
    }
}

pub fn synthesize(spec: &WaveformSpec) -> Result<Waveform> {
    spec.validate()?;
    let n = spec.samples_per_period;
    let level = |k: usize| level_at(&spec.angles, spec.dc_voltage, TAU * k as f64 / n as f64);
    let voltages = if n.is_multiple_of(2) {
        // Build the first half and negate it, so t and t + T/2 cancel exactly.
        let half: Vec<f64> = (0..n / 2).map(level).collect();
        half.iter()
            .copied()
            .chain(half.iter().map(|v| -v))
            .collect()
    } else {
        (0..n).map(level).collect()
    };
    Ok(Waveform {
        period: 1.0 / spec.frequency,
        dc_voltage: spec.dc_voltage,
        voltages,
    })
}

/// Quadrature Fourier coefficients of a sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSpectrum {
    /// Sine amplitudes `b_n` for `n = 1..=n_max`, including even ranks.
    pub spectrum: HarmonicSpectrum,
    /// Mean value.
    pub a0: f64,
    /// Cosine amplitudes `a_n` for `n = 1..=n_max`, keyed by rank.
    pub cosine: BTreeMap<u32, f64>,
}

impl NumericSpectrum {
    /// Largest magnitude among `a_0` and all `a_n`.
    pub fn max_cosine_term(&self) -> f64 {
        self.cosine
            .values()
            .fold(self.a0.abs(), |m, a| m.max(a.abs()))
    }
}

/// Evaluates `b_n = (2/T) ∫ U(t) sin(nωt) dt` (and the matching `a_n`) with
/// the midpoint rule on cells centred at the samples.
///
/// The trigonometric factors come from a single table indexed by
/// `(n · k) mod N`, so every harmonic sees exactly the same grid phases.
pub fn numeric_spectrum(waveform: &Waveform, n_max: u32) -> Result<NumericSpectrum> {
    let samples = waveform.len();
    if n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be at least 1".into()));
    }
    if n_max as usize >= samples / 4 {
        return Err(Error::Aliasing { n_max, samples });
    }

    let nonzero: Vec<(usize, f64)> = waveform
        .voltages
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, &v)| (k, v))
        .collect();
    let step = TAU / samples as f64;
    let (sin_table, cos_table): (Vec<f64>, Vec<f64>) =
        (0..samples).map(|k| (k as f64 * step).sin_cos()).unzip();

    let scale = 2.0 / samples as f64;
    let coefficients: Vec<(u32, f64, f64)> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let (mut b, mut a) = (0.0, 0.0);
            for &(k, v) in &nonzero {
                let idx = (n as usize * k) % samples;
                b += v * sin_table[idx];
                a += v * cos_table[idx];
            }
            (n, scale * b, scale * a)
        })
        .collect();

    let a0 = nonzero.iter().map(|(_, v)| v).sum::<f64>() / samples as f64;
    let spectrum = HarmonicSpectrum::new(coefficients.iter().map(|&(n, b, _)| (n, b)).collect())?;
    let cosine = coefficients.iter().map(|&(n, _, a)| (n, a)).collect();
    Ok(NumericSpectrum {
        spectrum,
        a0,
        cosine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::analytic_spectrum;

    fn deg(a: &[f64]) -> SwitchingAngleSet {
        SwitchingAngleSet::from_degrees(a).unwrap()
    }

    #[test]
    fn level_examples() {
        let a = deg(&[37.33, 82.67]);
        assert_eq!(level_at(&a, 1.0, 60f64.to_radians()), 1.0);
        assert_eq!(level_at(&a, 1.0, 10f64.to_radians()), 0.0);
        assert_eq!(level_at(&a, 1.0, 240f64.to_radians()), -1.0);
        assert_eq!(level_at(&a, 2.5, 100f64.to_radians()), 2.5);
        assert_eq!(level_at(&a, 1.0, 90f64.to_radians()), 0.0);
    }

    #[test]
    fn level_is_right_continuous() {
        let a = deg(&[45.0]);
        let t1 = a.as_slice()[0];
        assert_eq!(level_at(&a, 1.0, t1), 1.0);
        // Falling edge of the mirrored pulse.
        assert_eq!(level_at(&a, 1.0, PI - t1), 0.0);
        assert_eq!(level_at(&a, 1.0, PI + t1), -1.0);
    }

    #[test]
    fn odd_p_pulse_spans_quarter_point() {
        let a = deg(&[30.45, 54.28, 67.09]);
        assert_eq!(level_at(&a, 1.0, FRAC_PI_2), 1.0);
        assert_eq!(level_at(&a, 1.0, 3.0 * FRAC_PI_2), -1.0);
    }

    #[test]
    fn single_pulse_pattern() {
        let w = synthesize(&WaveformSpec {
            samples_per_period: 360,
            ..WaveformSpec::new(deg(&[45.0]))
        })
        .unwrap();
        let v = w.voltages();
        assert_eq!(v[44], 0.0);
        assert_eq!(v[46], 1.0);
        assert_eq!(v[134], 1.0);
        assert_eq!(v[136], 0.0);
        assert_eq!(v[226], -1.0);
        assert_eq!(v[316], 0.0);
        assert_eq!(w.transition_count(), 4);
    }

    #[test]
    fn transition_counts() {
        // Closed form: each quarter has p edges and none falls on π/2 or π
        // (odd p pulses span π/2, even p zero intervals do), so 4p per period.
        for angles in [
            vec![37.33, 82.67],
            vec![30.45, 54.28, 67.09],
            vec![22.58, 33.6, 46.64, 68.5, 75.1],
        ] {
            let p = angles.len();
            let expected = 4 * p;
            let w = synthesize(&WaveformSpec::new(deg(&angles))).unwrap();
            assert_eq!(w.transition_count(), expected, "p = {p}");
        }
    }

    #[test]
    fn half_wave_antisymmetry_is_exact() {
        let w = synthesize(&WaveformSpec::new(deg(&[12.5, 40.0, 41.0, 80.0]))).unwrap();
        let n = w.len();
        for k in 0..n / 2 {
            assert_eq!(w.voltages()[k] + w.voltages()[k + n / 2], 0.0);
        }
        let pos = w.voltages()[..n / 2].iter().filter(|v| **v != 0.0).count();
        let neg = w.voltages()[n / 2..].iter().filter(|v| **v != 0.0).count();
        assert_eq!(pos, neg);
    }

    #[test]
    fn spec_validation() {
        let mut spec = WaveformSpec::new(deg(&[30.0]));
        spec.samples_per_period = 63;
        assert!(synthesize(&spec).is_err());
        spec.samples_per_period = 64;
        spec.frequency = 0.0;
        assert!(synthesize(&spec).is_err());
    }

    #[test]
    fn aliasing_is_rejected() {
        let w = synthesize(&WaveformSpec {
            samples_per_period: 64,
            ..WaveformSpec::new(deg(&[30.0]))
        })
        .unwrap();
        assert!(matches!(
            numeric_spectrum(&w, 16),
            Err(Error::Aliasing { .. })
        ));
        assert!(numeric_spectrum(&w, 15).is_ok());
    }

    #[test]
    fn square_wave_fundamental() {
        let w = synthesize(&WaveformSpec {
            samples_per_period: ORACLE_SAMPLES,
            ..WaveformSpec::new(deg(&[0.001]))
        })
        .unwrap();
        let s = numeric_spectrum(&w, 9).unwrap();
        assert!((s.spectrum.fundamental() - 4.0 / PI).abs() < 1e-3);
    }

    #[test]
    fn numeric_matches_analytic_two_angle() {
        let angles = deg(&[37.33, 82.67]);
        let w = synthesize(&WaveformSpec {
            samples_per_period: ORACLE_SAMPLES,
            ..WaveformSpec::new(angles.clone())
        })
        .unwrap();
        let numeric = numeric_spectrum(&w, 49).unwrap();
        let analytic = analytic_spectrum(&angles, 1.0, 49).unwrap();
        for n in 1..=49 {
            let d = (numeric.spectrum.amplitude(n) - analytic.amplitude(n)).abs();
            assert!(d < 1e-3, "n = {n}: {d}");
        }
        assert!(numeric.max_cosine_term() < 1e-9);
    }

    #[test]
    fn rms_matches_conduction_fraction() {
        let w = synthesize(&WaveformSpec {
            dc_voltage: 3.0,
            ..WaveformSpec::new(deg(&[20.0, 50.0, 70.0]))
        })
        .unwrap();
        let expected = 9.0 * w.conduction_fraction();
        assert!((w.rms().powi(2) - expected).abs() <= 1e-9 * expected);
    }
}
