use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use shepwm::{
    analytic_spectrum, build_schedule, evaluate_bn, export_csv, export_timer_table, newton_solve,
    synthesize, thd, ScheduleConfig, SheProblem, SolveResult, SolverConfig, SweepConfig,
    SweepStrategy, SwitchingAngleSet, WaveformSpec,
};

use crate::args::{
    AngleSource, Command, GateFormat, GatesArgs, SolveArgs, SolverArgs, SpectrumArgs, Strategy,
    SweepArgs, WaveformArgs,
};
use crate::manifest::{manifest_path, RunManifest};
use crate::svg::Chart;

/// The solver ran but produced no valid switching angles (exit code 2).
#[derive(Debug)]
pub struct NotConverged(pub String);

impl fmt::Display for NotConverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotConverged {}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Rerun(args) => {
            let manifest = RunManifest::load(&args.manifest)?;
            if matches!(manifest.command, Command::Rerun(_)) {
                bail!("a manifest cannot describe another rerun");
            }
            run(manifest.command)
        }
        Command::Solve(ref args) => {
            emit_manifest(&command, args.manifest.as_deref(), None)?;
            solve(args)
        }
        Command::Sweep(ref args) => {
            emit_manifest(&command, args.manifest.as_deref(), args.output.as_deref())?;
            sweep(args)
        }
        Command::Spectrum(ref args) => {
            emit_manifest(&command, args.manifest.as_deref(), args.output.as_deref())?;
            spectrum(args)
        }
        Command::Waveform(ref args) => {
            emit_manifest(&command, args.manifest.as_deref(), args.output.as_deref())?;
            waveform(args)
        }
        Command::Gates(ref args) => {
            emit_manifest(&command, args.manifest.as_deref(), args.output.as_deref())?;
            gates(args)
        }
    }
}

fn emit_manifest(command: &Command, explicit: Option<&Path>, output: Option<&Path>) -> Result<()> {
    match manifest_path(explicit, output) {
        Some(path) => RunManifest::new(command.clone()).write(&path),
        None => Ok(()),
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("cannot write {}", p.display())),
        None => io::stdout()
            .write_all(content.as_bytes())
            .context("cannot write to stdout"),
    }
}

fn solver_config(args: &SolverArgs, guess: Option<&[f64]>) -> Result<SolverConfig> {
    let initial_guess = guess
        .map(SwitchingAngleSet::from_degrees)
        .transpose()
        .context("invalid --guess")?;
    let config = SolverConfig {
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        initial_guess,
    };
    config.validate()?;
    Ok(config)
}

fn problem(p: usize, m: f64, args: &SolverArgs) -> Result<SheProblem> {
    let problem = match &args.eliminate {
        Some(ranks) => SheProblem::new(p, m, ranks.clone()),
        None => SheProblem::with_default_eliminated(p, m),
    };
    Ok(problem?)
}

fn describe_failure(r: &SolveResult) -> String {
    if !r.converged {
        format!(
            "did not converge after {} iterations (last step {:e} rad)",
            r.iterations, r.final_step_norm
        )
    } else {
        format!(
            "converged to an invalid ordering: theta = {:?}°",
            r.theta_degrees()
        )
    }
}

/// Formats `x` with 12 significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Serialize)]
struct HarmonicRow {
    n: u32,
    amplitude: f64,
    target: f64,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    converged: bool,
    ordering_valid: bool,
    iterations: usize,
    modulation_index: f64,
    eliminated: &'a [u32],
    theta_deg: Vec<f64>,
    theta_rad: &'a [f64],
    final_step_norm: f64,
    residual_norm: f64,
    harmonics: Vec<HarmonicRow>,
}

fn solve(args: &SolveArgs) -> Result<()> {
    let problem = problem(args.p, args.modulation, &args.solver)?;
    let config = solver_config(&args.solver, args.guess.as_deref())?;
    let r = newton_solve(&problem, &config)?;

    // Verification uses the raw iterate so failures are reported too.
    let v = problem.dc_voltage();
    let harmonics: Vec<HarmonicRow> = problem
        .ranks()
        .map(|n| {
            let amplitude = match SwitchingAngleSet::new(r.theta.clone()) {
                Ok(a) => evaluate_bn(&a, v, n).expect("system ranks are odd"),
                Err(_) => {
                    let sum: f64 = r
                        .theta
                        .iter()
                        .enumerate()
                        .map(
                            |(i, t)| if i % 2 == 0 { 1.0 } else { -1.0 } * (f64::from(n) * t).cos(),
                        )
                        .sum();
                    4.0 * v / (f64::from(n) * std::f64::consts::PI) * sum
                }
            };
            let target = if n == 1 {
                problem.modulation_index() * v
            } else {
                0.0
            };
            HarmonicRow {
                n,
                amplitude,
                target,
            }
        })
        .collect();

    if args.json {
        let report = SolveReport {
            converged: r.converged,
            ordering_valid: r.ordering_valid,
            iterations: r.iterations,
            modulation_index: problem.modulation_index(),
            eliminated: problem.eliminated(),
            theta_deg: r.theta_degrees(),
            theta_rad: &r.theta,
            final_step_norm: r.final_step_norm,
            residual_norm: r.residual_norm,
            harmonics,
        };
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_output(None, &json)?;
    } else {
        let mut out = String::new();
        let deg: Vec<String> = r
            .theta_degrees()
            .iter()
            .map(|d| format!("{d:.2}"))
            .collect();
        let rad: Vec<String> = r.theta.iter().map(|t| sig12(*t)).collect();
        let _ = writeln!(
            out,
            "M = {}, p = {}, eliminated = {:?}",
            problem.modulation_index(),
            problem.p(),
            problem.eliminated()
        );
        let _ = writeln!(
            out,
            "converged: {} after {} iterations",
            r.converged, r.iterations
        );
        let _ = writeln!(out, "ordering valid: {}", r.ordering_valid);
        let _ = writeln!(out, "theta (deg): {}", deg.join(" "));
        let _ = writeln!(out, "theta (rad): {}", rad.join(" "));
        let _ = writeln!(out, "final step: {:e} rad", r.final_step_norm);
        let _ = writeln!(out, "residual: {:e}", r.residual_norm);
        let _ = writeln!(
            out,
            "{:>4}  {:>14}  {:>14}  {:>10}",
            "n", "b_n (V)", "target (V)", "error"
        );
        for h in &harmonics {
            let _ = writeln!(
                out,
                "{:>4}  {:>14.10}  {:>14.10}  {:>10.2e}",
                h.n,
                h.amplitude,
                h.target,
                (h.amplitude - h.target).abs()
            );
        }
        write_output(None, &out)?;
    }

    if r.is_solution() {
        Ok(())
    } else {
        Err(NotConverged(describe_failure(&r)).into())
    }
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let config = solver_config(&args.solver, None)?;
    let result = shepwm::sweep(
        &SweepConfig {
            p: args.p,
            m_max: args.m_max,
            step: args.step,
            eliminated: args.solver.eliminate.clone(),
            strategy: match args.strategy {
                Strategy::Paper => SweepStrategy::Paper,
                Strategy::Warm => SweepStrategy::Warm,
            },
        },
        &config,
    )?;

    let mut csv = String::from("M");
    for i in 1..=args.p {
        let _ = write!(csv, ",theta{i}_deg");
    }
    csv.push_str(",converged\n");
    for point in &result.points {
        let _ = write!(csv, "{:?}", point.modulation_index);
        match point.solution() {
            Some(r) => {
                for d in r.theta_degrees() {
                    let _ = write!(csv, ",{d:?}");
                }
                csv.push_str(",1\n");
            }
            None => {
                csv.push_str(&",".repeat(args.p));
                csv.push_str(",0\n");
            }
        }
    }
    write_output(args.output.as_deref(), &csv)?;

    if let Some(path) = &args.svg {
        let series: Vec<Vec<(f64, f64)>> = (0..args.p)
            .map(|i| {
                result
                    .points
                    .iter()
                    .filter_map(|pt| {
                        pt.solution()
                            .map(|r| (pt.modulation_index, r.theta[i].to_degrees()))
                    })
                    .collect()
            })
            .collect();
        let x_max = result.points.last().map_or(1.0, |p| p.modulation_index);
        let chart = Chart {
            title: "Switching Angles with N-R Algorithm".into(),
            x_label: "Modulation index M".into(),
            y_label: "Switching Angles (°)".into(),
            x_range: (0.0, if x_max > 0.0 { x_max } else { 1.0 }),
            y_range: (0.0, 90.0),
        };
        fs::write(path, chart.lines(&series))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    eprintln!(
        "{}/{} grid points converged",
        result.converged_count(),
        result.points.len()
    );
    Ok(())
}

fn resolve_angles(source: &AngleSource) -> Result<SwitchingAngleSet> {
    match (&source.angles, source.p, source.modulation) {
        (Some(deg), _, _) => SwitchingAngleSet::from_degrees(deg).context("invalid --angles"),
        (None, Some(p), Some(m)) => {
            let problem = problem(p, m, &source.solver)?;
            let config = solver_config(&source.solver, source.guess.as_deref())?;
            let r = newton_solve(&problem, &config)?;
            r.angles()
                .filter(|_| r.converged)
                .ok_or_else(|| NotConverged(describe_failure(&r)).into())
        }
        _ => Err(anyhow!("give either --angles or both -p and -m")),
    }
}

fn spectrum(args: &SpectrumArgs) -> Result<()> {
    if !(args.dc_voltage > 0.0) {
        bail!("--dc-voltage must be positive");
    }
    let angles = resolve_angles(&args.source)?;
    let spectrum = analytic_spectrum(&angles, args.dc_voltage, args.n_max)?;
    let ratio = thd(&spectrum, args.n_max)?;
    let b1 = spectrum.fundamental();

    let mut csv = String::from("n,amplitude,amplitude_pct_of_fundamental\n");
    for (n, b) in spectrum.iter() {
        let _ = writeln!(csv, "{n},{b:?},{:?}", 100.0 * b / b1);
    }
    write_output(args.output.as_deref(), &csv)?;
    write_output(
        None,
        &format!(
            "# THD = {ratio} ({:.4}%) over n <= {}\n",
            100.0 * ratio,
            args.n_max
        ),
    )?;

    if let Some(path) = &args.svg {
        let bars: Vec<(f64, f64)> = spectrum
            .iter()
            .map(|(n, b)| (f64::from(n), 100.0 * (b / b1).abs()))
            .collect();
        let y_max = bars.iter().map(|b| b.1).fold(100.0, f64::max);
        let chart = Chart {
            title: format!("Harmonic spectrum (THD = {:.2}%)", 100.0 * ratio),
            x_label: "Harmonic order n".into(),
            y_label: "Amplitude (% of fundamental)".into(),
            x_range: (0.0, f64::from(args.n_max) + 1.0),
            y_range: (0.0, y_max),
        };
        fs::write(path, chart.bars(&bars, 0.6))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn waveform(args: &WaveformArgs) -> Result<()> {
    let angles = resolve_angles(&args.source)?;
    let w = synthesize(&WaveformSpec {
        angles,
        dc_voltage: args.dc_voltage,
        frequency: args.frequency,
        samples_per_period: args.samples,
    })?;
    let mut csv = String::with_capacity(24 * w.len());
    csv.push_str("time_s,voltage_V\n");
    for (t, v) in w.samples() {
        let _ = writeln!(csv, "{t:?},{v:?}");
    }
    write_output(args.output.as_deref(), &csv)
}

fn gates(args: &GatesArgs) -> Result<()> {
    let angles = resolve_angles(&args.source)?;
    let schedule = build_schedule(
        &angles,
        &ScheduleConfig {
            frequency: args.frequency,
            dead_time: args.dead_time,
        },
    )?;
    let text = match args.format {
        GateFormat::Csv => export_csv(&schedule),
        GateFormat::C => export_timer_table(&schedule, args.tick)?,
    };
    write_output(args.output.as_deref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.651_530_238_627_123), "0.651530238627");
        assert_eq!(sig12(1.442_864_864_969_2), "1.44286486497");
        assert_eq!(sig12(0.0), "0");
    }
}
