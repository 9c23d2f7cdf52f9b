//! Selective harmonic elimination PWM for the single-phase H-bridge.
//!
//! The crate is organised bottom-up:
//!
//! - [`harmonic`] holds the domain types ([`SwitchingAngleSet`],
//!   [`HarmonicSpectrum`]) and the closed-form Fourier coefficients and THD
//!   of the quarter-wave symmetric three-level waveform.
//! - [`solver`] builds the elimination system and solves it with
//!   Newton-Raphson, including modulation-index sweeps.
//! - [`waveform`] synthesizes the sampled output voltage and computes a
//!   quadrature spectrum that serves as an independent cross-check.
//! - [`gate`] turns a set of switching angles into per-switch gate events
//!   with dead time and exports them as CSV or a C timer table.
//!
//! ```
//! use shepwm::{newton_solve, SheProblem, SolverConfig};
//!
//! let problem = SheProblem::with_default_eliminated(2, 0.85).unwrap();
//! let result = newton_solve(&problem, &SolverConfig::default()).unwrap();
//! assert!(result.converged && result.ordering_valid);
//! let deg = result.theta_degrees();
//! assert!((deg[0] - 37.33).abs() < 0.01);
//! assert!((deg[1] - 82.67).abs() < 0.01);
//! ```

// NaN must fail the `!(x > 0.0)` style guards used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gate;
pub mod harmonic;
mod linalg;
pub mod solver;
mod sum;
pub mod waveform;

pub use error::{Error, Result};
pub use gate::{
    build_schedule, export_csv, export_timer_table, BridgeState, GateEvent, GateSchedule,
    ScheduleConfig, TimerTable,
};
pub use harmonic::{
    analytic_spectrum, evaluate_bn, fundamental_amplitude, thd, HarmonicSpectrum,
    SwitchingAngleSet, DEFAULT_THD_N_MAX,
};
pub use solver::{
    default_initial_guess, jacobian, newton_solve, newton_step, residual, sweep, target_vector,
    SheJacobian, SheProblem, SolveResult, SolverConfig, SweepConfig, SweepPoint, SweepResult,
    SweepStrategy,
};
pub use waveform::{
    level_at, numeric_spectrum, synthesize, NumericSpectrum, Waveform, WaveformSpec,
};
