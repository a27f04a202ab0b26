//! Positional low-level controllers and the plant they fly.
//!
//! The plant is a point mass whose horizontal acceleration is set by tilt:
//! `a = g * tan(tilt)` per axis. Altitude follows a critically damped
//! second-order response towards the reference height. Two LLC families turn
//! a reference position into tilt angles:
//!
//! - **A** (PID-XY): error `e = (ref - p) - k_v * v`, tilt `k_p * e + k_i * ∫e`.
//!   Cruising with a reference `epsilon` ahead settles at speed `epsilon / k_v`.
//! - **B** (explicit-XY): the constant acceleration that would cancel the
//!   error over a horizon `t_delta`, `a = (e - v * t_delta) / t_delta^2`,
//!   converted to tilt with `atan(a / g)`. With zero error it decelerates as
//!   `v0 * exp(-t / t_delta)` and stops after `t_delta * v0`.
//!
//! Both clamp tilt to `[tilt_min, tilt_max]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Vec2, Vec3, GRAVITY};

/// Mass of a Crazyflie 2.1, kg.
pub const DEFAULT_MASS: f64 = 0.031;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlcError {
    #[error("invalid LLC config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LlcFamily {
    #[serde(alias = "a")]
    A,
    #[serde(alias = "b")]
    B,
}

impl LlcFamily {
    pub fn label(self) -> &'static str {
        match self {
            LlcFamily::A => "A",
            LlcFamily::B => "B",
        }
    }
}

impl std::str::FromStr for LlcFamily {
    type Err = LlcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "A" => Ok(LlcFamily::A),
            "b" | "B" => Ok(LlcFamily::B),
            other => Err(LlcError::InvalidConfig(format!(
                "unknown LLC family {other:?}, expected A or B"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Accumulated PID-XY error, m·s.
    pub integrator_xy: Vec2,
    pub mass: f64,
}

impl PlantState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            integrator_xy: Vec2::zeros(),
            mass: DEFAULT_MASS,
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.velocity.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlcConfig {
    pub family: LlcFamily,
    /// Velocity weight in the PID-XY error, s.
    pub k_v: f64,
    /// Tilt per metre of error, rad/m.
    pub k_p: f64,
    /// Tilt per integrated error, rad/(m·s).
    pub k_i: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
    /// Explicit-XY horizon, s.
    pub t_delta: f64,
    /// Altitude response time constant, s.
    pub z_time_constant: f64,
}

impl LlcConfig {
    /// Defaults shared by both families; only `family` differs.
    pub fn for_family(family: LlcFamily) -> Self {
        Self {
            family,
            k_v: 1.3,
            k_p: 0.1,
            k_i: 0.02,
            tilt_min: -0.35,
            tilt_max: 0.35,
            t_delta: 0.5,
            z_time_constant: 0.4,
        }
    }

    pub fn family_a() -> Self {
        Self::for_family(LlcFamily::A)
    }

    pub fn family_b() -> Self {
        Self::for_family(LlcFamily::B)
    }

    pub fn validate(&self) -> Result<(), LlcError> {
        let finite = [
            self.k_v,
            self.k_p,
            self.k_i,
            self.tilt_min,
            self.tilt_max,
            self.t_delta,
            self.z_time_constant,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(LlcError::InvalidConfig("all gains must be finite".into()));
        }
        if !(self.tilt_min < 0.0 && 0.0 < self.tilt_max) {
            return Err(LlcError::InvalidConfig(format!(
                "tilt limits must satisfy tilt_min < 0 < tilt_max, got [{}, {}]",
                self.tilt_min, self.tilt_max
            )));
        }
        if self.tilt_max >= std::f64::consts::FRAC_PI_2
            || self.tilt_min <= -std::f64::consts::FRAC_PI_2
        {
            return Err(LlcError::InvalidConfig(
                "tilt limits must stay inside (-pi/2, pi/2)".into(),
            ));
        }
        if self.t_delta <= 0.0 {
            return Err(LlcError::InvalidConfig("t_delta must be > 0".into()));
        }
        if self.z_time_constant <= 0.0 {
            return Err(LlcError::InvalidConfig(
                "z_time_constant must be > 0".into(),
            ));
        }
        if self.k_v < 0.0 || self.k_p < 0.0 || self.k_i < 0.0 {
            return Err(LlcError::InvalidConfig("k_v, k_p, k_i must be >= 0".into()));
        }
        Ok(())
    }

    fn clamp_tilt(&self, tilt: f64) -> f64 {
        tilt.clamp(self.tilt_min, self.tilt_max)
    }
}

/// PID-XY tilt command. Updates `state.integrator_xy` unless the axis saturates.
pub fn pid_xy_tilt(state: &mut PlantState, ref_xy: &Vec2, cfg: &LlcConfig, dt: f64) -> Vec2 {
    let mut tilt = Vec2::zeros();
    for axis in 0..2 {
        let e = (ref_xy[axis] - state.position[axis]) - cfg.k_v * state.velocity[axis];
        let integ = state.integrator_xy[axis] + e * dt;
        let raw = cfg.k_p * e + cfg.k_i * integ;
        let clamped = cfg.clamp_tilt(raw);
        if clamped == raw {
            state.integrator_xy[axis] = integ;
            tilt[axis] = raw;
        } else {
            // Anti-windup: hold the integrator while saturated.
            tilt[axis] = cfg.clamp_tilt(cfg.k_p * e + cfg.k_i * state.integrator_xy[axis]);
        }
    }
    tilt
}

/// Explicit-XY tilt command.
pub fn explicit_xy_tilt(state: &PlantState, ref_xy: &Vec2, cfg: &LlcConfig) -> Vec2 {
    let mut tilt = Vec2::zeros();
    let t = cfg.t_delta;
    for axis in 0..2 {
        let e = ref_xy[axis] - state.position[axis];
        let accel = (e - state.velocity[axis] * t) / (t * t);
        tilt[axis] = cfg.clamp_tilt((accel / GRAVITY).atan());
    }
    tilt
}

/// Tilt command from whichever family `cfg` selects.
pub fn llc_tilt(state: &mut PlantState, ref_xy: &Vec2, cfg: &LlcConfig, dt: f64) -> Vec2 {
    match cfg.family {
        LlcFamily::A => pid_xy_tilt(state, ref_xy, cfg, dt),
        LlcFamily::B => explicit_xy_tilt(state, ref_xy, cfg),
    }
}

/// Advance the plant by `dt` with semi-implicit Euler (velocity first).
pub fn integrate_plant(
    state: &PlantState,
    tilt_xy: &Vec2,
    z_ref: f64,
    z_time_constant: f64,
    dt: f64,
) -> PlantState {
    let omega = 1.0 / z_time_constant;
    let accel = Vec3::new(
        GRAVITY * tilt_xy.x.tan(),
        GRAVITY * tilt_xy.y.tan(),
        omega * omega * (z_ref - state.position.z) - 2.0 * omega * state.velocity.z,
    );
    let velocity = state.velocity + accel * dt;
    PlantState {
        position: state.position + velocity * dt,
        velocity,
        ..*state
    }
}

/// One LLC + plant step towards `reference`.
pub fn step_closed_loop(
    state: &PlantState,
    reference: &Vec3,
    cfg: &LlcConfig,
    dt: f64,
) -> PlantState {
    let mut next = *state;
    let tilt = llc_tilt(&mut next, &Vec2::new(reference.x, reference.y), cfg, dt);
    integrate_plant(&next, &tilt, reference.z, cfg.z_time_constant, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResponseMetrics {
    /// Time to first reach 90% of the step, s.
    pub rise_time_90: f64,
    /// Peak excursion past the step, percent of the step.
    pub overshoot_pct: f64,
    /// Time after which the response stays within 2% of the step, s.
    pub settling_time_2pct: f64,
    /// False when the response left the 2% band at the end of the run.
    pub settled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSample {
    pub time: f64,
    pub position: f64,
    pub velocity: f64,
    pub tilt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub samples: Vec<StepSample>,
    pub metrics: StepResponseMetrics,
}

/// Single-axis step from rest: reference jumps from 0 to `step` on x.
pub fn step_response(
    cfg: &LlcConfig,
    step: f64,
    duration: f64,
    dt: f64,
) -> Result<StepResponse, LlcError> {
    cfg.validate()?;
    if !(step.is_finite() && step >= 0.0) {
        return Err(LlcError::InvalidConfig(format!(
            "step must be >= 0, got {step}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0 && duration.is_finite() && duration > 0.0) {
        return Err(LlcError::InvalidConfig(
            "dt and duration must be > 0".into(),
        ));
    }

    let steps = (duration / dt).round() as usize;
    let reference = Vec2::new(step, 0.0);
    let mut state = PlantState::at_rest(Vec3::zeros());
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(StepSample {
        time: 0.0,
        position: 0.0,
        velocity: 0.0,
        tilt: 0.0,
    });
    for k in 1..=steps {
        let tilt = llc_tilt(&mut state, &reference, cfg, dt);
        state = integrate_plant(&state, &tilt, 0.0, cfg.z_time_constant, dt);
        samples.push(StepSample {
            time: k as f64 * dt,
            position: state.position.x,
            velocity: state.velocity.x,
            tilt: tilt.x,
        });
    }

    let metrics = if step == 0.0 {
        StepResponseMetrics {
            rise_time_90: 0.0,
            overshoot_pct: 0.0,
            settling_time_2pct: 0.0,
            settled: true,
        }
    } else {
        step_metrics(&samples, step, steps as f64 * dt)
    };
    Ok(StepResponse { samples, metrics })
}

fn step_metrics(samples: &[StepSample], step: f64, duration: f64) -> StepResponseMetrics {
    let rise = samples
        .iter()
        .find(|s| s.position >= 0.9 * step)
        .map(|s| s.time);
    let peak = samples
        .iter()
        .map(|s| s.position)
        .fold(f64::NEG_INFINITY, f64::max);
    let band = 0.02 * step;
    let last_out = samples
        .iter()
        .rposition(|s| (s.position - step).abs() > band);
    let (settling, settled) = match last_out {
        None => (0.0, true),
        Some(i) if i + 1 < samples.len() => (samples[i + 1].time, true),
        Some(_) => (duration, false),
    };
    StepResponseMetrics {
        rise_time_90: rise.unwrap_or(duration),
        overshoot_pct: ((peak - step) / step * 100.0).max(0.0),
        settling_time_2pct: settling,
        settled: settled && rise.is_some(),
    }
}
