mod common;

use std::f64::consts::TAU;

use rand::Rng;
use shepwm::waveform::ORACLE_SAMPLES;
use shepwm::{
    analytic_spectrum, build_schedule, level_at, numeric_spectrum, synthesize, BridgeState,
    ScheduleConfig, TimerTable, WaveformSpec,
};

use common::{random_angles, rng, GOLDEN};

#[test]
fn numeric_spectrum_matches_closed_form_for_random_angles() {
    let mut rng = rng(11);
    for i in 0..50 {
        let p = [1usize, 2, 3, 5][i % 4];
        let angles = random_angles(&mut rng, p);
        let analytic = analytic_spectrum(&angles, 1.0, 49).unwrap();
        let w = synthesize(&WaveformSpec {
            samples_per_period: ORACLE_SAMPLES,
            ..WaveformSpec::new(angles.clone())
        })
        .unwrap();
        let numeric = numeric_spectrum(&w, 49).unwrap();
        for n in 1..=49 {
            let d = (numeric.spectrum.amplitude(n) - analytic.amplitude(n)).abs();
            assert!(d < 1e-3, "set {i}, n = {n}: {d}");
            if n % 2 == 0 {
                assert_eq!(analytic.amplitude(n), 0.0);
            }
        }
        assert!(numeric.max_cosine_term() < 1e-9);
    }
}

#[test]
fn quadrature_error_is_first_order() {
    // Each of the 4p edges is misplaced by at most one cell, which moves any
    // b_n by at most 2V/N, so the error is bounded by 8pV/N.
    let mut rng = rng(12);
    for p in [1usize, 2, 3, 5] {
        let angles = random_angles(&mut rng, p);
        let analytic = analytic_spectrum(&angles, 1.0, 49).unwrap();
        for log_n in [10u32, 12, 14, 16, 18] {
            let n_samples = 1usize << log_n;
            let w = synthesize(&WaveformSpec {
                samples_per_period: n_samples,
                ..WaveformSpec::new(angles.clone())
            })
            .unwrap();
            let numeric = numeric_spectrum(&w, 49).unwrap();
            let err = (1..=49)
                .map(|n| (numeric.spectrum.amplitude(n) - analytic.amplitude(n)).abs())
                .fold(0.0, f64::max);
            assert!(
                err <= 8.0 * p as f64 / n_samples as f64,
                "p={p} N=2^{log_n}: {err:e}"
            );
        }
    }
}

#[test]
fn level_function_is_periodic() {
    let mut rng = rng(13);
    for _ in 0..1000 {
        let p = rng.gen_range(1..6);
        let angles = random_angles(&mut rng, p);
        let phase: f64 = rng.gen_range(0.0..TAU);
        let level = level_at(&angles, 1.0, phase);
        assert_eq!(level, level_at(&angles, 1.0, phase + TAU));
        assert!([-1.0, 0.0, 1.0].contains(&level));
    }
}

#[test]
fn ideal_schedule_replays_level_function() {
    let mut rng = rng(14);
    for p in [1usize, 2, 3, 5, 7] {
        let angles = random_angles(&mut rng, p);
        let schedule = build_schedule(
            &angles,
            &ScheduleConfig {
                frequency: 60.0,
                dead_time: 0.0,
            },
        )
        .unwrap();
        for _ in 0..200_000 {
            let phase: f64 = rng.gen_range(0.0..TAU);
            let t = phase / TAU * schedule.period();
            assert_eq!(
                schedule.level_at_time(t, 1.0),
                level_at(&angles, 1.0, phase)
            );
        }
    }
}

#[test]
fn dead_time_shrinks_positive_interval_by_half_window_per_edge() {
    for (_, golden, _) in GOLDEN {
        let angles = shepwm::SwitchingAngleSet::from_degrees(golden).unwrap();
        let ideal = build_schedule(
            &angles,
            &ScheduleConfig {
                frequency: 50.0,
                dead_time: 0.0,
            },
        )
        .unwrap();
        let dt = 1e-6;
        let with_dt = build_schedule(
            &angles,
            &ScheduleConfig {
                frequency: 50.0,
                dead_time: dt,
            },
        )
        .unwrap();
        // Entries and exits of +V in the ideal schedule.
        let ev = ideal.events();
        let edges = (0..ev.len())
            .filter(|&i| {
                let prev = ev[(i + ev.len() - 1) % ev.len()].state;
                (prev == BridgeState::POSITIVE) != (ev[i].state == BridgeState::POSITIVE)
            })
            .count();
        let expected = ideal.time_in(BridgeState::POSITIVE) - edges as f64 * dt / 2.0;
        assert!((with_dt.time_in(BridgeState::POSITIVE) - expected).abs() < 1e-15);
        assert!(with_dt.segments().all(|(s, _)| s.is_safe()));
    }
}

#[test]
fn quantized_schedule_keeps_fundamental() {
    for (_, golden, _) in GOLDEN {
        let angles = shepwm::SwitchingAngleSet::from_degrees(golden).unwrap();
        let schedule = build_schedule(&angles, &ScheduleConfig::default()).unwrap();
        let quantized = TimerTable::quantize(&schedule, 16e6)
            .unwrap()
            .to_schedule(&schedule);
        let ideal_w = schedule.replay(1.0, ORACLE_SAMPLES).unwrap();
        let quant_w = quantized.replay(1.0, ORACLE_SAMPLES).unwrap();
        let b1_ideal = numeric_spectrum(&ideal_w, 1)
            .unwrap()
            .spectrum
            .fundamental();
        let b1_quant = numeric_spectrum(&quant_w, 1)
            .unwrap()
            .spectrum
            .fundamental();
        assert!((b1_ideal - b1_quant).abs() < 1e-4);
    }
}
