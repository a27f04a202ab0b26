use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::controller::{decide, ControllerError, Decision};
use crate::llc::{step_closed_loop, PlantState};
use crate::sim::observe::{observe, NoiseSource, Observation};
use crate::sim::scenario::{ConfigError, ScenarioConfig};
use crate::sim::trace::{AgentRecord, TickRecord, Trace};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent {agent} at t={time}s: {source}")]
    Controller {
        agent: usize,
        time: f64,
        #[source]
        source: ControllerError,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for per-agent control. Results do not depend on it.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: 1 }
    }
}

/// Everything that happened at one control tick.
#[derive(Debug, Clone)]
pub struct ControlTick {
    pub index: u64,
    pub record: TickRecord,
    pub observations: Vec<Observation>,
    pub decisions: Vec<Decision>,
}

/// The lockstep simulated world.
///
/// Control runs every `control_period`, physics every `physics_dt`. At each
/// control tick every agent reads a noisy snapshot of its neighbourhood, all
/// taken at the same instant, and computes its next setpoint from that
/// snapshot alone. Between control ticks each LLC keeps flying towards its
/// latest setpoint.
pub struct World {
    cfg: ScenarioConfig,
    noise: NoiseSource,
    plants: Vec<PlantState>,
    setpoints: Vec<Vec3>,
    /// True positions at past control ticks, newest last.
    history: VecDeque<Vec<Vec3>>,
    physics_steps: u64,
    control_ticks: u64,
    steps_per_control: u64,
    pool: Option<rayon::ThreadPool>,
}

impl World {
    pub fn new(cfg: ScenarioConfig, opts: RunOptions) -> Result<Self, SimError> {
        cfg.validate()?;
        let spawn = cfg.spawn_positions()?;
        let pool = if opts.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(opts.threads)
                    .build()?,
            )
        } else {
            None
        };
        Ok(Self {
            noise: NoiseSource::new(cfg.seed),
            plants: spawn.iter().map(|p| PlantState::at_rest(*p)).collect(),
            setpoints: spawn,
            history: VecDeque::new(),
            physics_steps: 0,
            control_ticks: 0,
            steps_per_control: cfg.steps_per_control(),
            pool,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.physics_steps as f64 * self.cfg.physics_dt
    }

    pub fn plants(&self) -> &[PlantState] {
        &self.plants
    }

    pub fn setpoints(&self) -> &[Vec3] {
        &self.setpoints
    }

    pub fn true_positions(&self) -> Vec<Vec3> {
        self.plants.iter().map(|p| p.position).collect()
    }

    /// Observe, decide and latch new setpoints for every agent.
    pub fn control(&mut self) -> Result<ControlTick, SimError> {
        let time = self.time();
        let tick = self.control_ticks;
        let target = self.cfg.active_target(time);
        let params = self.cfg.cost.with_scene(target, &self.cfg.obstacles);

        self.history.push_back(self.true_positions());
        while self.history.len() > self.cfg.observation_latency as usize + 1 {
            self.history.pop_front();
        }
        let snapshot = &self.history[0];

        let (r_h, sigma, noise) = (self.cfg.r_h, self.cfg.noise_sigma, self.noise);
        let observations: Vec<Observation> = (0..self.plants.len())
            .map(|i| observe(snapshot, i, r_h, sigma, &noise, tick))
            .collect();

        // Each decision sees only its own observation.
        let controller = &self.cfg.controller;
        let run = |obs: &Observation| {
            decide(&obs.own, &obs.neighbor_positions(), &params, controller).map_err(|source| {
                SimError::Controller {
                    agent: obs.agent,
                    time,
                    source,
                }
            })
        };
        let decisions: Vec<Decision> = match &self.pool {
            Some(pool) => pool.install(|| {
                observations
                    .par_iter()
                    .map(run)
                    .collect::<Result<Vec<_>, _>>()
            })?,
            None => observations.iter().map(run).collect::<Result<_, _>>()?,
        };

        for (sp, d) in self.setpoints.iter_mut().zip(&decisions) {
            *sp = d.setpoint.position;
        }
        let agents = self
            .plants
            .iter()
            .zip(&observations)
            .zip(&decisions)
            .map(|((plant, obs), d)| AgentRecord {
                position: plant.position,
                velocity: plant.velocity,
                observed: obs.own,
                setpoint: d.setpoint.position,
                cost: d.cost,
                grad_norm: d.gradient.norm(),
            })
            .collect();

        self.control_ticks += 1;
        Ok(ControlTick {
            index: tick,
            record: TickRecord {
                time,
                target,
                agents,
            },
            observations,
            decisions,
        })
    }

    /// Advance every plant by one physics step towards its latched setpoint.
    pub fn physics_step(&mut self) {
        let dt = self.cfg.physics_dt;
        let llc = &self.cfg.llc;
        for (plant, sp) in self.plants.iter_mut().zip(&self.setpoints) {
            *plant = step_closed_loop(plant, sp, llc, dt);
        }
        self.physics_steps += 1;
    }

    /// One control tick followed by one control period of physics.
    pub fn tick(&mut self) -> Result<ControlTick, SimError> {
        let out = self.control()?;
        for _ in 0..self.steps_per_control {
            self.physics_step();
        }
        Ok(out)
    }
}

/// Full rollout of `cfg` on one thread.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace, SimError> {
    run_scenario_with(cfg, RunOptions::default())
}

/// Full rollout; identical output for any `opts.threads`.
pub fn run_scenario_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Trace, SimError> {
    let mut world = World::new(cfg.clone(), opts)?;
    let ticks = cfg.control_ticks();
    let mut records = Vec::with_capacity(ticks as usize);
    for _ in 0..ticks {
        records.push(world.tick()?.record);
    }
    Ok(Trace {
        scenario: cfg.clone(),
        records,
    })
}
