//! Newton-Raphson solution of the selective harmonic elimination system.
//!
//! For `p` angles the unknowns satisfy one fundamental equation and `p - 1`
//! elimination equations:
//!
//! ```text
//! Σ_j (-1)^(j+1) cos(θ_j)     = M π / 4
//! Σ_j (-1)^(j+1) cos(n_k θ_j) = 0          for each eliminated rank n_k
//! ```
//!
//! Each Newton step solves `J · dθ = T − F(θ)` by Gaussian elimination and
//! updates `θ ← θ + dθ`; iteration stops once `max |dθ_i|` drops below the
//! tolerance. No projection onto the feasible region is applied during the
//! iteration, so the final iterate is checked afterwards and the outcome is
//! reported through [`SolveResult::ordering_valid`].
//!
//! The system usually has several solution branches. The solver returns
//! whichever one Newton reaches from the configured initial guess and makes
//! no uniqueness claim.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{alternating_cos_sum, validate_ordering, SwitchingAngleSet};
use crate::linalg;

/// Default convergence threshold on `max |dθ_i|`, radians.
pub const DEFAULT_TOLERANCE: f64 = 1e-15;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// Modulation index, angle count and the harmonic ranks to eliminate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheProblem {
    p: usize,
    modulation_index: f64,
    eliminated: Vec<u32>,
    dc_voltage: f64,
}

impl SheProblem {
    pub fn new(p: usize, modulation_index: f64, eliminated: Vec<u32>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidProblem(
                "angle count p must be at least 1".into(),
            ));
        }
        if !(modulation_index >= 0.0) || !modulation_index.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "modulation index must be a finite non-negative number, got {modulation_index}"
            )));
        }
        if eliminated.len() != p - 1 {
            return Err(Error::InvalidProblem(format!(
                "p = {p} angles eliminate exactly {} harmonics, got {}",
                p - 1,
                eliminated.len()
            )));
        }
        for (i, &n) in eliminated.iter().enumerate() {
            if n < 3 || n % 2 == 0 {
                return Err(Error::InvalidProblem(format!(
                    "eliminated rank {n} must be odd and at least 3"
                )));
            }
            if eliminated[..i].contains(&n) {
                return Err(Error::InvalidProblem(format!(
                    "eliminated rank {n} is repeated"
                )));
            }
        }
        Ok(Self {
            p,
            modulation_index,
            eliminated,
            dc_voltage: 1.0,
        })
    }

    /// Eliminates the first `p - 1` odd ranks `3, 5, …, 2p - 1`.
    pub fn with_default_eliminated(p: usize, modulation_index: f64) -> Result<Self> {
        Self::new(p, modulation_index, default_eliminated(p))
    }

    pub fn with_dc_voltage(mut self, dc_voltage: f64) -> Result<Self> {
        if !(dc_voltage > 0.0) || !dc_voltage.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "DC voltage must be positive, got {dc_voltage}"
            )));
        }
        self.dc_voltage = dc_voltage;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn modulation_index(&self) -> f64 {
        self.modulation_index
    }

    pub fn eliminated(&self) -> &[u32] {
        &self.eliminated
    }

    pub fn dc_voltage(&self) -> f64 {
        self.dc_voltage
    }

    /// Row ranks of the system: the fundamental followed by the eliminated ranks.
    pub fn ranks(&self) -> impl Iterator<Item = u32> + '_ {
        std::iter::once(1).chain(self.eliminated.iter().copied())
    }

    fn check_dimension(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: theta.len(),
            });
        }
        Ok(())
    }
}

pub fn default_eliminated(p: usize) -> Vec<u32> {
    (1..p as u32).map(|k| 2 * k + 1).collect()
}

/// Newton iteration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_guess: Option<SwitchingAngleSet>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            initial_guess: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`newton_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Final iterate in radians. Only a valid [`SwitchingAngleSet`] when
    /// `ordering_valid` holds.
    pub theta: Vec<f64>,
    pub iterations: usize,
    /// `max |dθ_i|` of the last applied step, radians.
    pub final_step_norm: f64,
    /// `max |T_i − F_i(θ)|` at the final iterate.
    pub residual_norm: f64,
    pub converged: bool,
    /// `0 < θ1 < … < θp < π/2` at the final iterate.
    pub ordering_valid: bool,
    /// `max |dθ_i|` of every step, in order.
    pub step_norms: Vec<f64>,
}

impl SolveResult {
    pub fn is_solution(&self) -> bool {
        self.converged && self.ordering_valid
    }

    pub fn angles(&self) -> Option<SwitchingAngleSet> {
        if self.ordering_valid {
            SwitchingAngleSet::new(self.theta.clone()).ok()
        } else {
            None
        }
    }

    pub fn theta_degrees(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.to_degrees()).collect()
    }
}

/// Row-major `p × p` Jacobian of the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SheJacobian {
    dim: usize,
    entries: Vec<f64>,
}

impl SheJacobian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.dim)
    }
}

/// `F(θ)`: row `i` is `Σ_j (-1)^(j+1) cos(n_i θ_j)`.
pub fn residual(theta: &[f64], problem: &SheProblem) -> Result<Vec<f64>> {
    problem.check_dimension(theta)?;
    Ok(problem
        .ranks()
        .map(|n| alternating_cos_sum(theta, f64::from(n)))
        .collect())
}

/// `T = (M π / 4, 0, …, 0)`.
pub fn target_vector(problem: &SheProblem) -> Vec<f64> {
    let mut t = vec![0.0; problem.p];
    t[0] = problem.modulation_index * PI / 4.0;
    t
}

/// `∂F_i/∂θ_j = (-1)^j · n_i · sin(n_i θ_j)` with 1-based `j`, i.e. column
/// signs `−, +, −, …`.
pub fn jacobian(theta: &[f64], problem: &SheProblem) -> Result<SheJacobian> {
    problem.check_dimension(theta)?;
    let mut entries = Vec::with_capacity(problem.p * problem.p);
    for n in problem.ranks() {
        let n = f64::from(n);
        for (j, &t) in theta.iter().enumerate() {
            let d = n * (n * t).sin();
            entries.push(if j % 2 == 0 { -d } else { d });
        }
    }
    Ok(SheJacobian {
        dim: problem.p,
        entries,
    })
}

/// Solves `J(θ) · dθ = T − F(θ)`.
pub fn newton_step(theta: &[f64], problem: &SheProblem) -> Result<Vec<f64>> {
    let f = residual(theta, problem)?;
    let j = jacobian(theta, problem)?;
    let rhs = target_vector(problem)
        .into_iter()
        .zip(f)
        .map(|(t, f)| t - f)
        .collect();
    linalg::solve(j.entries, rhs, problem.p).map_err(|pivot| Error::SingularJacobian {
        pivot,
        iterate: theta.to_vec(),
    })
}

/// Evenly spaced `θ_i = i · 90° / (p + 1)`, except the `p = 3` preset
/// `(35°, 55°, 80°)`.
pub fn default_initial_guess(p: usize) -> Vec<f64> {
    if p == 3 {
        return [35.0f64, 55.0, 80.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
    }
    let spacing = FRAC_PI_2 / (p + 1) as f64;
    (1..=p).map(|i| i as f64 * spacing).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| {
        if x.abs() > m || x.is_nan() {
            x.abs()
        } else {
            m
        }
    })
}

pub fn newton_solve(problem: &SheProblem, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let mut theta = match &config.initial_guess {
        Some(guess) => {
            problem.check_dimension(guess.as_slice())?;
            guess.as_slice().to_vec()
        }
        None => default_initial_guess(problem.p),
    };

    let mut step_norms = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let step = newton_step(&theta, problem)?;
        for (t, d) in theta.iter_mut().zip(&step) {
            *t += d;
        }
        let norm = max_abs(&step);
        step_norms.push(norm);
        if norm < config.tolerance {
            converged = true;
            break;
        }
        if !norm.is_finite() {
            break;
        }
    }

    let f = residual(&theta, problem)?;
    let target = target_vector(problem);
    let residual_norm = max_abs(
        &target
            .iter()
            .zip(&f)
            .map(|(t, f)| t - f)
            .collect::<Vec<_>>(),
    );
    Ok(SolveResult {
        ordering_valid: validate_ordering(&theta).is_ok(),
        theta,
        iterations: step_norms.len(),
        final_step_norm: step_norms.last().copied().unwrap_or(f64::INFINITY),
        residual_norm,
        converged,
        step_norms,
    })
}

/// How each grid point of a sweep picks its initial guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStrategy {
    /// Fresh initial guess at every point; points are independent.
    Paper,
    /// Previous valid solution seeds the next point.
    Warm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub p: usize,
    pub m_max: f64,
    pub step: f64,
    /// `None` selects the default ranks `3, 5, …, 2p - 1`.
    pub eliminated: Option<Vec<u32>>,
    pub strategy: SweepStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub modulation_index: f64,
    /// Per-point failures such as a singular Jacobian are kept as data.
    pub outcome: Result<SolveResult>,
}

impl SweepPoint {
    /// The solve result if it converged to a valid ordering.
    pub fn solution(&self) -> Option<&SolveResult> {
        self.outcome.as_ref().ok().filter(|r| r.is_solution())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub step: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn converged_count(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.solution().is_some())
            .count()
    }
}

/// Grid `M_k = k · step` for `k = 0..=floor(m_max / step)`.
///
/// Values are snapped to 12 decimal places so that e.g. `7 · 0.01` is the
/// double nearest `0.07`.
pub fn sweep_grid(m_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sweep step must be positive, got {step}"
        )));
    }
    if !(m_max >= 0.0) || !m_max.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sweep upper bound must be non-negative, got {m_max}"
        )));
    }
    let count = (m_max / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| (k as f64 * step * 1e12).round() / 1e12)
        .collect())
}

/// Solves at every `M` in [`sweep_grid`]. Unconverged points are recorded,
/// never fatal; only invalid arguments produce an error.
pub fn sweep(sweep: &SweepConfig, config: &SolverConfig) -> Result<SweepResult> {
    config.validate()?;
    let eliminated = sweep
        .eliminated
        .clone()
        .unwrap_or_else(|| default_eliminated(sweep.p));
    // Validates p and the eliminated ranks once up front.
    SheProblem::new(sweep.p, 0.0, eliminated.clone())?;
    let grid = sweep_grid(sweep.m_max, sweep.step)?;

    let solve_at = |m: f64, cfg: &SolverConfig| SweepPoint {
        modulation_index: m,
        outcome: SheProblem::new(sweep.p, m, eliminated.clone())
            .and_then(|problem| newton_solve(&problem, cfg)),
    };

    let points = match sweep.strategy {
        SweepStrategy::Paper => grid.par_iter().map(|&m| solve_at(m, config)).collect(),
        SweepStrategy::Warm => {
            let mut points: Vec<SweepPoint> = Vec::with_capacity(grid.len());
            let mut cfg = config.clone();
            for &m in &grid {
                let point = solve_at(m, &cfg);
                if let Some(angles) = point.solution().and_then(SolveResult::angles) {
                    cfg.initial_guess = Some(angles);
                }
                points.push(point);
            }
            points
        }
    };
    Ok(SweepResult {
        step: sweep.step,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rad(d: &[f64]) -> Vec<f64> {
        d.iter().map(|x| x.to_radians()).collect()
    }

    #[test]
    fn problem_validation() {
        assert!(SheProblem::new(0, 0.5, vec![]).is_err());
        assert!(SheProblem::new(2, -0.1, vec![3]).is_err());
        assert!(SheProblem::new(2, f64::NAN, vec![3]).is_err());
        assert!(SheProblem::new(2, 0.5, vec![]).is_err());
        assert!(SheProblem::new(3, 0.5, vec![3, 4]).is_err());
        assert!(SheProblem::new(3, 0.5, vec![1, 3]).is_err());
        assert!(SheProblem::new(3, 0.5, vec![5, 5]).is_err());
        assert!(SheProblem::new(3, 0.5, vec![7, 5]).is_ok());
        assert!(SheProblem::new(1, 0.5, vec![])
            .unwrap()
            .with_dc_voltage(0.0)
            .is_err());
        assert_eq!(
            SheProblem::with_default_eliminated(5, 0.85)
                .unwrap()
                .eliminated(),
            &[3, 5, 7, 9]
        );
    }

    #[test]
    fn residual_direct_substitution() {
        let problem = SheProblem::with_default_eliminated(2, 0.0).unwrap();
        let f = residual(&rad(&[0.0, 90.0]), &problem).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-15);
        assert!((f[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_at_reported_two_angle_solution() {
        let problem = SheProblem::with_default_eliminated(2, 0.85).unwrap();
        let f = residual(&rad(&[37.33, 82.67]), &problem).unwrap();
        assert!((f[0] - 0.85 * PI / 4.0).abs() < 2e-4);
        assert!((f[0] - 0.66759).abs() < 2e-4);
        assert!(f[1].abs() < 5e-4);
    }

    #[test]
    fn residual_at_three_angle_preset() {
        // Hand evaluation of cos(nθ1) − cos(nθ2) + cos(nθ3) at (35°, 55°, 80°).
        let problem = SheProblem::with_default_eliminated(3, 0.85).unwrap();
        let f = residual(&rad(&[35.0, 55.0, 80.0]), &problem).unwrap();
        let expected = [
            0.419_223_785_604_876_05,
            0.207_106_781_186_547_24,
            -0.317_305_997_720_425_34,
        ];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn residual_dimension_mismatch() {
        let problem = SheProblem::with_default_eliminated(3, 0.5).unwrap();
        assert_eq!(
            residual(&[0.1, 0.2], &problem),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        );
        assert!(jacobian(&[0.1], &problem).is_err());
    }

    #[test]
    fn target_vectors() {
        let t = target_vector(&SheProblem::with_default_eliminated(2, 0.0).unwrap());
        assert_eq!(t, vec![0.0, 0.0]);
        let t = target_vector(&SheProblem::with_default_eliminated(2, 0.85).unwrap());
        assert!((t[0] - 0.66759).abs() < 1e-5);
        assert_eq!(t[1], 0.0);
        let t = target_vector(&SheProblem::with_default_eliminated(5, 1.0).unwrap());
        assert_eq!(t, vec![PI / 4.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn jacobian_direct_substitution() {
        let problem = SheProblem::with_default_eliminated(2, 0.85).unwrap();
        let j = jacobian(&rad(&[30.0, 60.0]), &problem).unwrap();
        let expected = [[-0.5, 3f64.sqrt() / 2.0], [-3.0, 0.0]];
        for (r, row) in expected.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                assert!((j.get(r, c) - e).abs() < 1e-14);
            }
        }

        let problem = SheProblem::new(1, 0.5, vec![]).unwrap();
        let j = jacobian(&rad(&[45.0]), &problem).unwrap();
        assert!((j.get(0, 0) + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn newton_step_two_by_two_cramer() {
        let problem = SheProblem::with_default_eliminated(2, 0.85).unwrap();
        let step = newton_step(&rad(&[30.0, 60.0]), &problem).unwrap();
        // Cramer's rule on [[a, b], [c, d]] · x = (r1, r2).
        let (a, b, c, d) = (-0.5, 3f64.sqrt() / 2.0, -3.0, 0.0);
        let r1 = 0.85 * PI / 4.0 - (3f64.sqrt() / 2.0 - 0.5);
        let r2 = 0.0 - (0.0 - -1.0);
        let det = a * d - b * c;
        let x1 = (r1 * d - b * r2) / det;
        let x2 = (a * r2 - c * r1) / det;
        assert!((step[0] - x1).abs() < 1e-14);
        assert!((step[1] - x2).abs() < 1e-14);
    }

    #[test]
    fn newton_step_three_angle_first_iteration() {
        // Frozen from a separate dense-solve script of one iteration.
        let problem = SheProblem::with_default_eliminated(3, 0.85).unwrap();
        let step = newton_step(&default_initial_guess(3), &problem).unwrap();
        let expected = [
            -0.067_056_681_783_785_4,
            0.051_858_045_681_091_07,
            -0.170_005_664_625_705_02,
        ];
        for (a, b) in step.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn newton_step_vanishes_at_solution() {
        let problem = SheProblem::with_default_eliminated(3, 0.85).unwrap();
        let sol = newton_solve(&problem, &SolverConfig::default()).unwrap();
        let step = newton_step(&sol.theta, &problem).unwrap();
        assert!(max_abs(&step) < 1e-12);
    }

    #[test]
    fn newton_step_reports_singularity() {
        // θ1 = θ2 = 60° makes the triplen row vanish.
        let problem = SheProblem::with_default_eliminated(2, 0.0).unwrap();
        let theta = rad(&[60.0, 60.0]);
        match newton_step(&theta, &problem) {
            Err(Error::SingularJacobian { iterate, .. }) => assert_eq!(iterate, theta),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn default_guesses() {
        let close = |a: Vec<f64>, d: &[f64]| {
            a.iter()
                .zip(d)
                .all(|(x, y)| (x.to_degrees() - y).abs() < 1e-12)
        };
        assert!(close(default_initial_guess(3), &[35.0, 55.0, 80.0]));
        assert!(close(default_initial_guess(2), &[30.0, 60.0]));
        assert!(close(
            default_initial_guess(5),
            &[15.0, 30.0, 45.0, 60.0, 75.0]
        ));
        assert!(close(default_initial_guess(1), &[45.0]));
    }

    #[test]
    fn solve_reports_infeasible_modulation() {
        let problem = SheProblem::with_default_eliminated(2, 1.2).unwrap();
        let r = newton_solve(&problem, &SolverConfig::default()).unwrap();
        assert!(!r.is_solution());
        assert!(r.angles().is_none());
    }

    #[test]
    fn solve_honours_guess_dimension() {
        let problem = SheProblem::with_default_eliminated(2, 0.5).unwrap();
        let config = SolverConfig {
            initial_guess: Some(SwitchingAngleSet::from_degrees(&[10.0, 20.0, 30.0]).unwrap()),
            ..SolverConfig::default()
        };
        assert!(matches!(
            newton_solve(&problem, &config),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solve_rejects_bad_config() {
        let problem = SheProblem::with_default_eliminated(2, 0.5).unwrap();
        let config = SolverConfig {
            tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(newton_solve(&problem, &config).is_err());
        let config = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(newton_solve(&problem, &config).is_err());
    }

    #[test]
    fn iteration_cap_yields_unconverged_result() {
        let problem = SheProblem::with_default_eliminated(3, 0.85).unwrap();
        let config = SolverConfig {
            max_iterations: 2,
            ..SolverConfig::default()
        };
        let r = newton_solve(&problem, &config).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn grid_arithmetic() {
        assert_eq!(sweep_grid(0.85, 0.01).unwrap().len(), 86);
        assert_eq!(sweep_grid(0.85, 0.01).unwrap()[7], 0.07);
        assert_eq!(sweep_grid(0.5, 0.8).unwrap(), vec![0.0]);
        assert!(sweep_grid(0.5, 0.0).is_err());
        assert!(sweep_grid(-1.0, 0.1).is_err());
    }

    #[test]
    fn sweep_records_degenerate_zero_point() {
        let result = sweep(
            &SweepConfig {
                p: 2,
                m_max: 0.1,
                step: 0.05,
                eliminated: None,
                strategy: SweepStrategy::Paper,
            },
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(result.points.len(), 3);
        assert!(result.points[0].solution().is_none());
    }
}
