//! Spatial predictive flocking.
//!
//! Every agent in a flock carries a positional low-level controller (LLC): it
//! accepts a target position and flies there. This crate decides *which*
//! position to hand to the LLC. Each agent evaluates a local positional cost
//! (cohesion, separation, target seeking and obstacle avoidance) built only
//! from its own observed position and those of its neighbours, computes the
//! cost gradient in closed form, and then looks ahead along the negative
//! gradient at `N` equally spaced candidate points. The cheapest candidate
//! becomes the next setpoint. A plain potential-field controller that steps by
//! `-k * gradient` is provided as the baseline.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: cost function, analytical gradient, finite-difference oracle,
//!   two-agent equilibrium distance.
//! - [`controller`]: candidate construction, the SPC argmin, the PFC baseline
//!   and the distance-dependent lookahead count.
//! - [`llc`]: the two positional LLC families and the tilt-driven point-mass
//!   plant they fly, plus step-response characterisation.
//! - [`sim`]: scenario configuration, noisy local observation, the lockstep
//!   world, and trace capture.
//! - [`metrics`]: flock-quality metrics, thresholds, run aggregation and
//!   report rendering.
//!
//! ```
//! use flockspc::model::{evaluate_gradient, CostParams};
//! use flockspc::controller::{spc_setpoint, ControllerConfig};
//! use flockspc::Vec3;
//!
//! let params = CostParams { w_coh: 20.0, w_sep: 9.0, w_tar: 0.0, w_obs: 0.0, r_drone: 0.0,
//!                           ..CostParams::default() };
//! let me = Vec3::new(1.0, 0.0, 1.0);
//! let neighbours = [Vec3::new(0.0, 0.0, 1.0)];
//!
//! let grad = evaluate_gradient(&me, &neighbours, &params)?;
//! assert!((grad.total.x - 22.0).abs() < 1e-12);
//!
//! let cfg = ControllerConfig::spc(0.06, 5).with_dynamic_n(false);
//! let next = spc_setpoint(&me, &neighbours, &params, &cfg)?;
//! assert!((next.position.x - 0.82).abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod controller;
pub mod llc;
pub mod metrics;
pub mod model;
pub mod sim;

/// A point or direction in world coordinates, metres.
pub type Vec3 = nalgebra::Vector3<f64>;

/// A point on the ground plane, metres.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Gravitational acceleration used by the tilt-to-acceleration model, m/s².
pub const GRAVITY: f64 = 9.81;

pub(crate) fn is_finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Projection onto the xy-plane.
pub fn project_xy(v: &Vec3) -> Vec2 {
    Vec2::new(v.x, v.y)
}

// The guide under `book/` is compiled into doctests so its snippets cannot
// drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cost-function.md")]
    mod cost_function {}
    #[doc = include_str!("../../../book/src/gradient.md")]
    mod gradient {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/spc.md")]
    mod spc {}
    #[doc = include_str!("../../../book/src/llc.md")]
    mod llc {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
