use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Vec3;

/// 32-byte ChaCha key built from the scenario seed and a counter tuple.
///
/// Every (tick, observer, observed) triple gets its own keyed stream, so a
/// draw never depends on evaluation order or on which other agents happen to
/// be in range.
pub(crate) fn stream_key(seed: u64, tick: u64, observer: u64, observed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([seed, tick, observer, observed])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    key
}

/// Counter-based Gaussian noise for position measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Standard-normal sample per axis for `observer`'s measurement of
    /// `observed` at control tick `tick`.
    pub fn standard_normal(&self, tick: u64, observer: usize, observed: usize) -> Vec3 {
        let mut rng = ChaCha8Rng::from_seed(stream_key(
            self.seed,
            tick,
            observer as u64,
            observed as u64,
        ));
        Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng))
    }
}

/// What one agent knows at one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub agent: usize,
    /// Own measured position.
    pub own: Vec3,
    /// Measured positions of agents in range, ascending by id.
    pub neighbors: Vec<(usize, Vec3)>,
}

impl Observation {
    pub fn neighbor_positions(&self) -> Vec<Vec3> {
        self.neighbors.iter().map(|(_, p)| *p).collect()
    }
}

/// Noisy view of the flock from `agent`.
///
/// Neighbours are the agents strictly closer than `r_h` by *true* distance;
/// `None` means unlimited range.
pub fn observe(
    true_positions: &[Vec3],
    agent: usize,
    r_h: Option<f64>,
    sigma: f64,
    noise: &NoiseSource,
    tick: u64,
) -> Observation {
    let measure = |j: usize| {
        let p = true_positions[j];
        if sigma == 0.0 {
            p
        } else {
            p + sigma * noise.standard_normal(tick, agent, j)
        }
    };
    let me = true_positions[agent];
    let neighbors = true_positions
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != agent && r_h.is_none_or(|r| (p - me).norm() < r))
        .map(|(j, _)| (j, measure(j)))
        .collect();
    Observation {
        agent,
        own: measure(agent),
        neighbors,
    }
}
