//! Gate-drive schedules for the four-switch H-bridge.
//!
//! Switch naming: S1 top-left, S2 bottom-left, S3 top-right, S4 bottom-right,
//! with the load across the two leg midpoints. Under ideal switches the
//! output is `+V` when S1 and S4 conduct, `−V` when S2 and S3 conduct, and
//! zero otherwise.
//!
//! Zero intervals use the top freewheel pair (S1, S3) when they begin in the
//! positive half-period and the bottom pair (S2, S4) when they begin in the
//! negative half-period. With that assignment every commanded transition
//! moves exactly one leg. Dead time is inserted symmetrically around each
//! nominal instant: the outgoing switch opens `dead_time / 2` early and the
//! incoming switch closes `dead_time / 2` late.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{fundamental_amplitude, SwitchingAngleSet};
use crate::waveform::{level_at, Waveform, MIN_SAMPLES};

pub const DEFAULT_DEAD_TIME: f64 = 1e-6;
pub const DEFAULT_TICK_FREQUENCY: f64 = 16e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BridgeState {
    pub s1: bool,
    pub s2: bool,
    pub s3: bool,
    pub s4: bool,
}

impl BridgeState {
    pub const POSITIVE: Self = Self::new(true, false, false, true);
    pub const NEGATIVE: Self = Self::new(false, true, true, false);
    pub const ZERO_TOP: Self = Self::new(true, false, true, false);
    pub const ZERO_BOTTOM: Self = Self::new(false, true, false, true);
    pub const ALL_OFF: Self = Self::new(false, false, false, false);

    pub const fn new(s1: bool, s2: bool, s3: bool, s4: bool) -> Self {
        Self { s1, s2, s3, s4 }
    }

    /// Output voltage under ideal switches.
    pub fn output_level(&self, dc_voltage: f64) -> f64 {
        if self.s1 && self.s4 {
            dc_voltage
        } else if self.s2 && self.s3 {
            -dc_voltage
        } else {
            0.0
        }
    }

    /// No leg has both of its switches closed.
    pub fn is_safe(&self) -> bool {
        !(self.s1 && self.s2) && !(self.s3 && self.s4)
    }

    /// Switches closed in both states.
    pub fn intersect(&self, other: &Self) -> Self {
        Self::new(
            self.s1 && other.s1,
            self.s2 && other.s2,
            self.s3 && other.s3,
            self.s4 && other.s4,
        )
    }

    /// bit0 = S1, bit1 = S2, bit2 = S3, bit3 = S4.
    pub fn mask(&self) -> u8 {
        u8::from(self.s1) | u8::from(self.s2) << 1 | u8::from(self.s3) << 2 | u8::from(self.s4) << 3
    }

    pub fn from_mask(mask: u8) -> Self {
        Self::new(mask & 1 != 0, mask & 2 != 0, mask & 4 != 0, mask & 8 != 0)
    }
}

/// A switch-state change at `time` seconds into the period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateEvent {
    pub time: f64,
    pub state: BridgeState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub frequency: f64,
    pub dead_time: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            frequency: 50.0,
            dead_time: DEFAULT_DEAD_TIME,
        }
    }
}

/// Time-ordered gate events over one period. The state before the first
/// event is the state of the last one (the schedule wraps).
#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    events: Vec<GateEvent>,
    period: f64,
    dead_time: f64,
    angles: SwitchingAngleSet,
}

impl GateSchedule {
    pub fn events(&self) -> &[GateEvent] {
        &self.events
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dead_time(&self) -> f64 {
        self.dead_time
    }

    pub fn angles(&self) -> &SwitchingAngleSet {
        &self.angles
    }

    /// Bridge state at time `t`; `t` is reduced modulo the period.
    pub fn state_at(&self, t: f64) -> BridgeState {
        let t = t.rem_euclid(self.period);
        match self.events.partition_point(|e| e.time <= t) {
            0 => self.events[self.events.len() - 1].state,
            idx => self.events[idx - 1].state,
        }
    }

    pub fn level_at_time(&self, t: f64, dc_voltage: f64) -> f64 {
        self.state_at(t).output_level(dc_voltage)
    }

    /// `(state, duration)` of every segment between consecutive events,
    /// including the wrap-around segment.
    pub fn segments(&self) -> impl Iterator<Item = (BridgeState, f64)> + '_ {
        let n = self.events.len();
        (0..n).map(move |i| {
            let start = self.events[i].time;
            let end = if i + 1 < n {
                self.events[i + 1].time
            } else {
                self.events[0].time + self.period
            };
            (self.events[i].state, end - start)
        })
    }

    /// Total time per period spent in `state`.
    pub fn time_in(&self, state: BridgeState) -> f64 {
        self.segments()
            .filter(|(s, _)| *s == state)
            .map(|(_, d)| d)
            .sum()
    }

    /// Samples the ideal-bridge output at `t_k = k · T / N`.
    pub fn replay(&self, dc_voltage: f64, samples: usize) -> Result<Waveform> {
        if samples < MIN_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "need at least {MIN_SAMPLES} samples per period, got {samples}"
            )));
        }
        let voltages = (0..samples)
            .map(|k| self.level_at_time(k as f64 * self.period / samples as f64, dc_voltage))
            .collect();
        Waveform::from_samples(self.period, dc_voltage, voltages)
    }
}

/// Nominal output transitions over one period as `(phase, new state)`.
fn nominal_transitions(angles: &SwitchingAngleSet) -> Vec<(f64, BridgeState)> {
    let theta = angles.as_slice();
    let mut boundaries: Vec<f64> = theta
        .iter()
        .flat_map(|&t| [t, PI - t, PI + t, TAU - t])
        .collect();
    boundaries.sort_by(f64::total_cmp);

    // Level of each segment, sampled at its midpoint to stay clear of the
    // rounding at the edges themselves.
    let n = boundaries.len();
    let segment_level = |i: usize| {
        let end = if i + 1 < n {
            boundaries[i + 1]
        } else {
            boundaries[0] + TAU
        };
        level_at(angles, 1.0, 0.5 * (boundaries[i] + end))
    };
    let mut previous = segment_level(n - 1);
    let mut transitions = Vec::with_capacity(n);
    for (i, &phase) in boundaries.iter().enumerate() {
        let current = segment_level(i);
        if current == previous {
            continue;
        }
        let state = if current > 0.0 {
            BridgeState::POSITIVE
        } else if current < 0.0 {
            BridgeState::NEGATIVE
        } else if phase < PI {
            BridgeState::ZERO_TOP
        } else {
            BridgeState::ZERO_BOTTOM
        };
        transitions.push((phase, state));
        previous = current;
    }
    transitions
}

pub fn build_schedule(angles: &SwitchingAngleSet, config: &ScheduleConfig) -> Result<GateSchedule> {
    if !(config.frequency > 0.0) || !config.frequency.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "frequency must be positive, got {}",
            config.frequency
        )));
    }
    if !(config.dead_time >= 0.0) || !config.dead_time.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "dead time must be non-negative, got {}",
            config.dead_time
        )));
    }
    let period = 1.0 / config.frequency;
    let dead_time = config.dead_time;
    let transitions = nominal_transitions(angles);
    let n = transitions.len();

    for i in 0..n {
        let start = transitions[i].0;
        let end = if i + 1 < n {
            transitions[i + 1].0
        } else {
            transitions[0].0 + TAU
        };
        let duration = (end - start) / TAU * period;
        if dead_time >= duration {
            return Err(Error::DeadTimeTooLarge {
                dead_time,
                start_deg: start.to_degrees(),
                end_deg: end.to_degrees().rem_euclid(360.0),
                duration,
            });
        }
    }

    let mut events = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (phase, state) = transitions[i];
        let previous = transitions[(i + n - 1) % n].1;
        let t = phase / TAU * period;
        if dead_time > 0.0 {
            events.push(GateEvent {
                time: (t - dead_time / 2.0).rem_euclid(period),
                state: previous.intersect(&state),
            });
            events.push(GateEvent {
                time: (t + dead_time / 2.0).rem_euclid(period),
                state,
            });
        } else {
            events.push(GateEvent { time: t, state });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    Ok(GateSchedule {
        events,
        period,
        dead_time,
        angles: angles.clone(),
    })
}

/// CSV with header `time_s,s1,s2,s3,s4`, one row per event, LF endings.
pub fn export_csv(schedule: &GateSchedule) -> String {
    let mut out = String::from("time_s,s1,s2,s3,s4\n");
    for e in &schedule.events {
        let s = e.state;
        writeln!(
            out,
            "{:.9},{},{},{},{}",
            e.time,
            u8::from(s.s1),
            u8::from(s.s2),
            u8::from(s.s3),
            u8::from(s.s4)
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// A schedule quantized to a hardware timer.
///
/// Segment `k` holds `masks[k]` for `ticks[k]` timer ticks; segment 0 starts
/// at the beginning of the period. Edges are rounded to the nearest tick and
/// durations are taken as differences, so the ticks always sum to exactly
/// `period_ticks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimerTable {
    pub tick_frequency_hz: u64,
    pub period_ticks: u64,
    pub ticks: Vec<u64>,
    pub masks: Vec<u8>,
}

impl TimerTable {
    pub fn quantize(schedule: &GateSchedule, tick_frequency: f64) -> Result<Self> {
        if !(tick_frequency >= 1.0) || tick_frequency.fract() != 0.0 || !tick_frequency.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "tick frequency must be a positive whole number of hertz, got {tick_frequency}"
            )));
        }
        if schedule.dead_time > 0.0 && tick_frequency * schedule.dead_time < 2.0 {
            return Err(Error::TickTooCoarse(format!(
                "dead time {:e} s spans fewer than 2 ticks at {tick_frequency} Hz",
                schedule.dead_time
            )));
        }
        let period_ticks = (schedule.period * tick_frequency).round() as u64;
        let mut edges: Vec<(u64, BridgeState)> = schedule
            .events
            .iter()
            .map(|e| ((e.time * tick_frequency).round() as u64, e.state))
            .collect();
        if edges[0].0 > 0 {
            let wrap = edges[edges.len() - 1].1;
            edges.insert(0, (0, wrap));
        }

        let mut ticks = Vec::with_capacity(edges.len());
        let mut masks = Vec::with_capacity(edges.len());
        for (i, &(start, state)) in edges.iter().enumerate() {
            let end = edges.get(i + 1).map_or(period_ticks, |e| e.0);
            if end <= start {
                let at = start as f64 / tick_frequency;
                return Err(Error::TickTooCoarse(format!(
                    "segment at {at:e} s rounds to zero ticks at {tick_frequency} Hz"
                )));
            }
            ticks.push(end - start);
            masks.push(state.mask());
        }
        Ok(Self {
            tick_frequency_hz: tick_frequency as u64,
            period_ticks,
            ticks,
            masks,
        })
    }

    /// Back to a schedule with event times at whole ticks.
    pub fn to_schedule(&self, source: &GateSchedule) -> GateSchedule {
        let f = self.tick_frequency_hz as f64;
        let mut events = Vec::with_capacity(self.ticks.len());
        let mut start = 0u64;
        let last = self.masks[self.masks.len() - 1];
        for (i, (&duration, &mask)) in self.ticks.iter().zip(&self.masks).enumerate() {
            // Segment 0 may only be the wrap-around continuation of the last one.
            if !(i == 0 && mask == last && self.masks.len() > 1) {
                events.push(GateEvent {
                    time: start as f64 / f,
                    state: BridgeState::from_mask(mask),
                });
            }
            start += duration;
        }
        GateSchedule {
            events,
            period: self.period_ticks as f64 / f,
            dead_time: source.dead_time,
            angles: source.angles.clone(),
        }
    }

    /// C header with an include guard and `static const` `ticks[]` / `mask[]`.
    pub fn to_c_header(&self, schedule: &GateSchedule) -> String {
        let degrees: Vec<String> = schedule
            .angles
            .to_degrees()
            .iter()
            .map(|d| format!("{d:.4}"))
            .collect();
        let m = fundamental_amplitude(&schedule.angles, 1.0);
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(
            w,
            "/* shepwm gate table: theta_deg = [{}], M = {m:.6}, f = {} Hz, dead_time = {:e} s, tick = {} Hz */",
            degrees.join(", "),
            1.0 / schedule.period,
            schedule.dead_time,
            self.tick_frequency_hz
        );
        let _ = writeln!(w, "#ifndef SHEPWM_GATE_TABLE_H");
        let _ = writeln!(w, "#define SHEPWM_GATE_TABLE_H");
        let _ = writeln!(w);
        let _ = writeln!(w, "#include <stdint.h>");
        let _ = writeln!(w);
        let _ = writeln!(w, "#define SHEPWM_SEGMENTS {}u", self.ticks.len());
        let _ = writeln!(w, "#define SHEPWM_PERIOD_TICKS {}u", self.period_ticks);
        let _ = writeln!(w);
        let _ = writeln!(
            w,
            "/* Segment durations in timer ticks; segment k drives mask[k]. */"
        );
        let _ = writeln!(w, "static const uint32_t ticks[SHEPWM_SEGMENTS] = {{");
        write_rows(w, self.ticks.iter().map(|t| t.to_string()));
        let _ = writeln!(w, "}};");
        let _ = writeln!(w);
        let _ = writeln!(w, "/* bit0 = S1, bit1 = S2, bit2 = S3, bit3 = S4 */");
        let _ = writeln!(w, "static const uint8_t mask[SHEPWM_SEGMENTS] = {{");
        write_rows(w, self.masks.iter().map(|m| format!("0x{m:02X}")));
        let _ = writeln!(w, "}};");
        let _ = writeln!(w);
        let _ = writeln!(w, "#endif /* SHEPWM_GATE_TABLE_H */");
        out
    }
}

fn write_rows(out: &mut String, items: impl Iterator<Item = String>) {
    let items: Vec<String> = items.collect();
    for chunk in items.chunks(8) {
        let _ = writeln!(out, "    {},", chunk.join(", "));
    }
}

pub fn export_timer_table(schedule: &GateSchedule, tick_frequency: f64) -> Result<String> {
    Ok(TimerTable::quantize(schedule, tick_frequency)?.to_c_header(schedule))
}
