use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControllerConfig, ControllerKind};
use crate::llc::{LlcConfig, LlcFamily};
use crate::model::{CostParams, Obstacle, DEFAULT_ZERO_HAT};
use crate::{is_finite3, Vec3};

/// One problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

/// All problems found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub issues: Vec<FieldIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", issue.field, issue.message)?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            issues: vec![FieldIssue {
                field: field.into(),
                message: message.into(),
            }],
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ConfigError),
}

/// Where agents start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Spawn {
    /// Uniform rejection sampling inside an axis-aligned box.
    Box {
        min: Vec3,
        max: Vec3,
        #[serde(default = "default_min_spacing")]
        min_spacing: f64,
    },
    /// One explicit position per agent.
    Positions(Vec<Vec3>),
}

fn default_min_spacing() -> f64 {
    0.4
}

/// Target for the whole flock from `time` onward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time: f64,
    pub target: Vec3,
}

/// Cost weights and geometry; target and obstacles come from the scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub w_coh: f64,
    pub w_sep: f64,
    pub w_tar: f64,
    pub w_obs: f64,
    pub r_drone: f64,
    #[serde(default = "default_zero_hat")]
    pub zero_hat: f64,
}

fn default_zero_hat() -> f64 {
    DEFAULT_ZERO_HAT
}

impl Default for CostWeights {
    fn default() -> Self {
        let p = CostParams::default();
        Self {
            w_coh: p.w_coh,
            w_sep: p.w_sep,
            w_tar: p.w_tar,
            w_obs: p.w_obs,
            r_drone: p.r_drone,
            zero_hat: p.zero_hat,
        }
    }
}

impl CostWeights {
    /// Full cost parameters; without a target the target term is switched off.
    pub fn with_scene(&self, target: Option<Vec3>, obstacles: &[Obstacle]) -> CostParams {
        CostParams {
            w_coh: self.w_coh,
            w_sep: self.w_sep,
            w_tar: if target.is_some() { self.w_tar } else { 0.0 },
            w_obs: self.w_obs,
            r_drone: self.r_drone,
            zero_hat: self.zero_hat,
            target: target.unwrap_or_else(Vec3::zeros),
            obstacles: obstacles.to_vec(),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub agent_count: usize,
    pub spawn: Spawn,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub cost: CostWeights,
    pub controller: ControllerConfig,
    pub llc: LlcConfig,
    /// Neighbourhood radius; `null` means every agent sees every other.
    #[serde(default = "default_r_h")]
    pub r_h: Option<f64>,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_physics_dt")]
    pub physics_dt: f64,
    #[serde(default = "default_control_period")]
    pub control_period: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Observation delay in whole control ticks.
    #[serde(default)]
    pub observation_latency: u32,
    /// Metrics ignore samples before this time.
    #[serde(default = "default_formation_time")]
    pub formation_time: f64,
    #[serde(default = "default_r_safety")]
    pub r_safety: f64,
    #[serde(default = "default_comp_thr")]
    pub comp_thr: f64,
}

fn default_r_h() -> Option<f64> {
    Some(0.9)
}
fn default_noise_sigma() -> f64 {
    0.1
}
fn default_physics_dt() -> f64 {
    0.01
}
fn default_control_period() -> f64 {
    0.1
}
fn default_formation_time() -> f64 {
    10.0
}
fn default_r_safety() -> f64 {
    0.06
}
fn default_comp_thr() -> f64 {
    10.0
}

/// Ratio tolerance when checking that the control period is a whole number
/// of physics steps.
const CADENCE_TOLERANCE: f64 = 1e-9;

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Physics steps per control tick.
    pub fn steps_per_control(&self) -> u64 {
        (self.control_period / self.physics_dt).round() as u64
    }

    /// Number of control ticks (= trace records) in a run.
    pub fn control_ticks(&self) -> u64 {
        (self.duration / self.control_period).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, message: String| {
            issues.push(FieldIssue {
                field: field.to_string(),
                message,
            })
        };

        if self.agent_count < 1 {
            bad("agent_count", "must be >= 1".into());
        }
        match &self.spawn {
            Spawn::Box {
                min,
                max,
                min_spacing,
            } => {
                if !is_finite3(min) || !is_finite3(max) {
                    bad("spawn.box", "corners must be finite".into());
                } else if (0..3).any(|a| min[a] > max[a]) {
                    bad("spawn.box", "min must be <= max on every axis".into());
                }
                if !(min_spacing.is_finite() && *min_spacing >= 0.0) {
                    bad(
                        "spawn.box.min_spacing",
                        format!("must be >= 0, got {min_spacing}"),
                    );
                }
            }
            Spawn::Positions(ps) => {
                if ps.len() != self.agent_count {
                    bad(
                        "spawn.positions",
                        format!("expected {} positions, got {}", self.agent_count, ps.len()),
                    );
                }
                if let Some(i) = ps.iter().position(|p| !is_finite3(p)) {
                    bad(&format!("spawn.positions[{i}]"), "must be finite".into());
                }
            }
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.radius.is_finite() && o.radius > 0.0) {
                bad(
                    &format!("obstacles[{k}].radius"),
                    format!("must be > 0, got {}", o.radius),
                );
            }
            if !o.center_xy.iter().all(|c| c.is_finite()) {
                bad(
                    &format!("obstacles[{k}].center_xy"),
                    "must be finite".into(),
                );
            }
        }
        for (k, w) in self.waypoints.iter().enumerate() {
            if !w.time.is_finite() || w.time < 0.0 {
                bad(
                    &format!("waypoints[{k}].time"),
                    format!("must be >= 0, got {}", w.time),
                );
            }
            if !is_finite3(&w.target) {
                bad(&format!("waypoints[{k}].target"), "must be finite".into());
            }
            if k > 0 && w.time < self.waypoints[k - 1].time {
                bad(
                    &format!("waypoints[{k}].time"),
                    "times must be non-decreasing".into(),
                );
            }
        }
        if let Err(e) = self.cost.with_scene(None, &[]).validate() {
            bad("cost", e.to_string());
        }
        if let Err(e) = self.controller.validate() {
            bad("controller", e.to_string());
        }
        if let Err(e) = self.llc.validate() {
            bad("llc", e.to_string());
        }
        if let Some(r) = self.r_h {
            if !(r.is_finite() && r > 0.0) {
                bad("r_h", format!("must be > 0 or null, got {r}"));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            bad(
                "noise_sigma",
                format!("must be >= 0, got {}", self.noise_sigma),
            );
        }
        let dt_ok = self.physics_dt.is_finite() && self.physics_dt > 0.0;
        if !dt_ok {
            bad(
                "physics_dt",
                format!("must be > 0, got {}", self.physics_dt),
            );
        }
        if !(self.control_period.is_finite() && self.control_period > 0.0) {
            bad(
                "control_period",
                format!("must be > 0, got {}", self.control_period),
            );
        } else if dt_ok {
            let ratio = self.control_period / self.physics_dt;
            if ratio < 1.0 - CADENCE_TOLERANCE {
                bad("control_period", "must be >= physics_dt".into());
            } else if (ratio - ratio.round()).abs() > CADENCE_TOLERANCE * ratio {
                bad(
                    "control_period",
                    format!("must be an integer multiple of physics_dt, ratio is {ratio}"),
                );
            }
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            bad("duration", format!("must be > 0, got {}", self.duration));
        } else if self.control_period > 0.0 && self.duration < self.control_period {
            bad("duration", "must cover at least one control period".into());
        }
        if !(self.formation_time.is_finite() && self.formation_time >= 0.0) {
            bad(
                "formation_time",
                format!("must be >= 0, got {}", self.formation_time),
            );
        }
        if !(self.r_safety.is_finite() && self.r_safety >= 0.0) {
            bad("r_safety", format!("must be >= 0, got {}", self.r_safety));
        }
        if !(self.comp_thr.is_finite() && self.comp_thr > 0.0) {
            bad("comp_thr", format!("must be > 0, got {}", self.comp_thr));
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    /// Initial agent positions. Box spawns are rejection sampled from a
    /// stream derived from the seed.
    pub fn spawn_positions(&self) -> Result<Vec<Vec3>, ConfigError> {
        match &self.spawn {
            Spawn::Positions(ps) => Ok(ps.clone()),
            Spawn::Box {
                min,
                max,
                min_spacing,
            } => {
                let mut rng = ChaCha8Rng::from_seed(super::observe::stream_key(
                    self.seed,
                    u64::MAX,
                    u64::MAX,
                    u64::MAX,
                ));
                let mut placed: Vec<Vec3> = Vec::with_capacity(self.agent_count);
                const ATTEMPTS_PER_AGENT: usize = 10_000;
                for _ in 0..self.agent_count {
                    let mut ok = false;
                    for _ in 0..ATTEMPTS_PER_AGENT {
                        let p = Vec3::from_fn(|a, _| {
                            if max[a] > min[a] {
                                rng.random_range(min[a]..max[a])
                            } else {
                                min[a]
                            }
                        });
                        if placed.iter().all(|q| (p - q).norm() >= *min_spacing) {
                            placed.push(p);
                            ok = true;
                            break;
                        }
                    }
                    if !ok {
                        return Err(ConfigError::single(
                            "spawn.box",
                            format!(
                                "cannot place {} agents {min_spacing} m apart in the box",
                                self.agent_count
                            ),
                        ));
                    }
                }
                Ok(placed)
            }
        }
    }

    /// Target of the last waypoint whose time has been reached.
    pub fn active_target(&self, time: f64) -> Option<Vec3> {
        self.waypoints
            .iter()
            .take_while(|w| w.time <= time + 1e-9)
            .last()
            .map(|w| w.target)
    }
}

/// Hand-placed obstacle layouts and the flight path used by the shipped
/// scenarios. Coordinates are approximations chosen for this simulator, not
/// measured values.
pub mod layouts {
    use super::*;

    pub const OBSTACLE_RADIUS: f64 = 0.15;
    pub const FLIGHT_ALTITUDE: f64 = 1.0;

    /// Named obstacle layout.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ObstacleLayout {
        pub name: String,
        pub obstacles: Vec<Obstacle>,
    }

    pub fn no_obstacles() -> ObstacleLayout {
        ObstacleLayout {
            name: "none".into(),
            obstacles: Vec::new(),
        }
    }

    /// One pillar in the middle of the first leg, a two-pillar gate on the second.
    pub fn three_obstacles() -> ObstacleLayout {
        let r = OBSTACLE_RADIUS;
        ObstacleLayout {
            name: "three".into(),
            obstacles: vec![
                Obstacle::new(4.0, 0.0, r),
                Obstacle::new(7.0, 4.0, r),
                Obstacle::new(9.0, 4.0, r),
            ],
        }
    }

    /// A cluttered field along both legs.
    pub fn eleven_obstacles() -> ObstacleLayout {
        let r = OBSTACLE_RADIUS;
        let pts = [
            (2.5, 0.8),
            (3.0, -0.9),
            (4.0, 0.0),
            (5.0, 1.0),
            (5.5, -1.0),
            (6.5, 0.3),
            (7.2, 1.8),
            (8.9, 2.2),
            (7.0, 4.0),
            (9.0, 4.0),
            (8.2, 6.0),
        ];
        ObstacleLayout {
            name: "eleven".into(),
            obstacles: pts.iter().map(|&(x, y)| Obstacle::new(x, y, r)).collect(),
        }
    }

    pub fn by_name(name: &str) -> Option<ObstacleLayout> {
        match name {
            "none" => Some(no_obstacles()),
            "three" => Some(three_obstacles()),
            "eleven" => Some(eleven_obstacles()),
            _ => None,
        }
    }

    /// Hover at the origin during formation, fly east, then north.
    pub fn flight_path() -> Vec<Waypoint> {
        let z = FLIGHT_ALTITUDE;
        vec![
            Waypoint {
                time: 0.0,
                target: Vec3::new(0.0, 0.0, z),
            },
            Waypoint {
                time: 10.0,
                target: Vec3::new(8.0, 0.0, z),
            },
            Waypoint {
                time: 30.0,
                target: Vec3::new(8.0, 8.0, z),
            },
        ]
    }

    /// Spawn box around the first waypoint, sized for the flock.
    pub fn spawn_box(agent_count: usize) -> Spawn {
        let half = 0.5 * (agent_count as f64).sqrt().max(2.0);
        Spawn::Box {
            min: Vec3::new(-half, -half, 0.5),
            max: Vec3::new(half, half, 1.5),
            min_spacing: default_min_spacing(),
        }
    }

    /// Simulation scenario with the tuned parameters for one controller/LLC pair.
    pub fn scenario(
        agent_count: usize,
        layout: &ObstacleLayout,
        kind: ControllerKind,
        family: LlcFamily,
        seed: u64,
    ) -> ScenarioConfig {
        ScenarioConfig {
            agent_count,
            spawn: spawn_box(agent_count),
            obstacles: layout.obstacles.clone(),
            waypoints: flight_path(),
            cost: CostWeights::default(),
            controller: ControllerConfig::preset(kind, family),
            llc: LlcConfig::for_family(family),
            r_h: default_r_h(),
            noise_sigma: default_noise_sigma(),
            physics_dt: default_physics_dt(),
            control_period: default_control_period(),
            duration: 60.0,
            seed,
            observation_latency: 0,
            formation_time: default_formation_time(),
            r_safety: default_r_safety(),
            comp_thr: default_comp_thr(),
        }
    }

    /// Two noiseless SPC agents `initial_separation` apart on the x axis with
    /// unlimited sensing range and no target, for checking the equilibrium
    /// spacing of the cohesion/separation pair.
    pub fn pair_scenario(
        w_coh: f64,
        w_sep: f64,
        r_drone: f64,
        initial_separation: f64,
        duration: f64,
    ) -> ScenarioConfig {
        let mut cfg = scenario(2, &no_obstacles(), ControllerKind::Spc, LlcFamily::A, 0);
        cfg.cost.w_coh = w_coh;
        cfg.cost.w_sep = w_sep;
        cfg.cost.r_drone = r_drone;
        cfg.noise_sigma = 0.0;
        cfg.r_h = None;
        cfg.waypoints.clear();
        cfg.duration = duration;
        cfg.formation_time = 0.0;
        let z = FLIGHT_ALTITUDE;
        cfg.spawn = Spawn::Positions(vec![
            Vec3::new(0.0, 0.0, z),
            Vec3::new(initial_separation, 0.0, z),
        ]);
        cfg
    }

    /// Hardware-like preset: short lookahead, no obstacles, hover only.
    pub fn hardware_scenario(seed: u64) -> ScenarioConfig {
        let mut cfg = scenario(9, &no_obstacles(), ControllerKind::Spc, LlcFamily::A, seed);
        cfg.controller = ControllerConfig::hardware_preset();
        cfg.waypoints = vec![Waypoint {
            time: 0.0,
            target: Vec3::new(0.0, 0.0, FLIGHT_ALTITUDE),
        }];
        cfg.duration = 30.0;
        cfg
    }
}
