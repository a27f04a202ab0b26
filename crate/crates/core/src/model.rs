//! The local positional cost an agent minimises, and its gradient.
//!
//! An agent `i` sees its own position `p_i` and the positions of its
//! neighbours `H_i`. Its cost is the sum of four terms:
//!
//! - cohesion: `w_coh / |H| * sum ||p_i - p_j||^2`
//! - separation: `w_sep / |H| * sum 1 / max(||p_i - p_j|| - 2 r_drone, zero_hat)^2`
//! - target seeking: `w_tar * ||target - centroid({p_i} ∪ H)||^2`
//! - obstacle avoidance: `w_obs / |K| * sum 1 / max(||P(p_i) - c_k|| - r_k - r_drone, zero_hat)^2`
//!
//! where `P` projects onto the xy-plane and obstacles are infinitely tall
//! cylinders. The gradient is available in closed form, per term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{is_finite3, project_xy, Vec2, Vec3};

/// Default clamp floor for separation and obstacle gaps, metres.
pub const DEFAULT_ZERO_HAT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid cost parameters: {0}")]
    InvalidParams(String),
    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),
}

/// An infinitely tall cylinder standing on the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center_xy: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Self {
            center_xy: Vec2::new(x, y),
            radius,
        }
    }
}

/// Weights and geometry of the cost function.
///
/// Weights are in 1/m. The default carries the simulation weights
/// (20, 9, 150, 12), a 7 cm drone radius, target at the origin and no
/// obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub w_coh: f64,
    pub w_sep: f64,
    pub w_tar: f64,
    pub w_obs: f64,
    pub r_drone: f64,
    pub zero_hat: f64,
    pub target: Vec3,
    pub obstacles: Vec<Obstacle>,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            w_coh: 20.0,
            w_sep: 9.0,
            w_tar: 150.0,
            w_obs: 12.0,
            r_drone: 0.07,
            zero_hat: DEFAULT_ZERO_HAT,
            target: Vec3::zeros(),
            obstacles: Vec::new(),
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let weights = [
            ("w_coh", self.w_coh),
            ("w_sep", self.w_sep),
            ("w_tar", self.w_tar),
            ("w_obs", self.w_obs),
        ];
        for (name, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {w}"
                )));
            }
        }
        if !self.r_drone.is_finite() || self.r_drone < 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "r_drone must be finite and >= 0, got {}",
                self.r_drone
            )));
        }
        if !self.zero_hat.is_finite() || self.zero_hat <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "zero_hat must be finite and > 0, got {}",
                self.zero_hat
            )));
        }
        if !is_finite3(&self.target) {
            return Err(ModelError::NonFinite("target"));
        }
        for (k, obs) in self.obstacles.iter().enumerate() {
            if !(obs.radius.is_finite() && obs.radius > 0.0) {
                return Err(ModelError::InvalidParams(format!(
                    "obstacles[{k}].radius must be > 0, got {}",
                    obs.radius
                )));
            }
            if !obs.center_xy.iter().all(|c| c.is_finite()) {
                return Err(ModelError::NonFinite("obstacle center"));
            }
        }
        Ok(())
    }
}

/// Value of each cost term at one position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub coh: f64,
    pub sep: f64,
    pub tar: f64,
    pub obs: f64,
    pub total: f64,
}

/// Gradient of each cost term with respect to the agent's own position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBreakdown {
    pub coh: Vec3,
    pub sep: Vec3,
    pub tar: Vec3,
    pub obs: Vec3,
    pub total: Vec3,
}

fn check_inputs(p_i: &Vec3, neighbors: &[Vec3], params: &CostParams) -> Result<(), ModelError> {
    if !is_finite3(p_i) {
        return Err(ModelError::NonFinite("agent position"));
    }
    if !neighbors.iter().all(is_finite3) {
        return Err(ModelError::NonFinite("neighbour position"));
    }
    params.validate()
}

fn centroid_with(p_i: &Vec3, neighbors: &[Vec3]) -> Vec3 {
    let sum = neighbors.iter().fold(*p_i, |acc, p| acc + p);
    sum / (neighbors.len() + 1) as f64
}

/// Cost of standing at `p_i` given frozen neighbour positions.
pub fn evaluate_cost(
    p_i: &Vec3,
    neighbors: &[Vec3],
    params: &CostParams,
) -> Result<CostBreakdown, ModelError> {
    check_inputs(p_i, neighbors, params)?;
    let mut out = CostBreakdown::default();

    if !neighbors.is_empty() {
        let inv_h = 1.0 / neighbors.len() as f64;
        if params.w_coh != 0.0 {
            let sum: f64 = neighbors.iter().map(|p| (p_i - p).norm_squared()).sum();
            out.coh = params.w_coh * inv_h * sum;
        }
        if params.w_sep != 0.0 {
            let two_r = 2.0 * params.r_drone;
            let sum: f64 = neighbors
                .iter()
                .map(|p| {
                    let gap = ((p_i - p).norm() - two_r).max(params.zero_hat);
                    1.0 / (gap * gap)
                })
                .sum();
            out.sep = params.w_sep * inv_h * sum;
        }
    }

    if params.w_tar != 0.0 {
        out.tar = params.w_tar * (params.target - centroid_with(p_i, neighbors)).norm_squared();
    }

    if params.w_obs != 0.0 && !params.obstacles.is_empty() {
        let q = project_xy(p_i);
        let sum: f64 = params
            .obstacles
            .iter()
            .map(|k| {
                let gap =
                    ((q - k.center_xy).norm() - k.radius - params.r_drone).max(params.zero_hat);
                1.0 / (gap * gap)
            })
            .sum();
        out.obs = params.w_obs * sum / params.obstacles.len() as f64;
    }

    out.total = out.coh + out.sep + out.tar + out.obs;
    Ok(out)
}

/// Closed-form gradient of [`evaluate_cost`] with respect to `p_i`.
///
/// Inside a clamp (gap at or below `zero_hat`) the separation and obstacle
/// terms keep their repulsive direction with the gap replaced by `zero_hat`.
/// For exactly coincident points the repulsion direction is `+x`.
pub fn evaluate_gradient(
    p_i: &Vec3,
    neighbors: &[Vec3],
    params: &CostParams,
) -> Result<GradientBreakdown, ModelError> {
    check_inputs(p_i, neighbors, params)?;
    let mut coh = Vec3::zeros();
    let mut sep = Vec3::zeros();
    let mut tar = Vec3::zeros();
    let mut obs = Vec3::zeros();

    if !neighbors.is_empty() {
        let h = neighbors.len() as f64;
        if params.w_coh != 0.0 {
            let mean = neighbors.iter().fold(Vec3::zeros(), |acc, p| acc + p) / h;
            coh = 2.0 * params.w_coh * (p_i - mean);
        }
        if params.w_sep != 0.0 {
            let two_r = 2.0 * params.r_drone;
            let sum = neighbors.iter().fold(Vec3::zeros(), |acc, p| {
                let diff = p_i - p;
                let d = diff.norm();
                let away = if d > 0.0 { diff / d } else { Vec3::x() };
                let gap = (d - two_r).max(params.zero_hat);
                acc - away / (gap * gap * gap)
            });
            sep = 2.0 * params.w_sep / h * sum;
        }
    }

    if params.w_tar != 0.0 {
        let n = (neighbors.len() + 1) as f64;
        tar = 2.0 * params.w_tar / n * (centroid_with(p_i, neighbors) - params.target);
    }

    if params.w_obs != 0.0 && !params.obstacles.is_empty() {
        let q = project_xy(p_i);
        let sum = params.obstacles.iter().fold(Vec2::zeros(), |acc, k| {
            let diff = q - k.center_xy;
            let d = diff.norm();
            let away = if d > 0.0 { diff / d } else { Vec2::x() };
            let gap = (d - k.radius - params.r_drone).max(params.zero_hat);
            acc - away / (gap * gap * gap)
        });
        let g = 2.0 * params.w_obs / params.obstacles.len() as f64 * sum;
        obs = Vec3::new(g.x, g.y, 0.0);
    }

    Ok(GradientBreakdown {
        coh,
        sep,
        tar,
        obs,
        total: coh + sep + tar + obs,
    })
}

/// Central-difference estimate of the cost gradient with step `h`.
///
/// Only meaningful away from the clamp boundaries, where the cost is smooth.
pub fn finite_difference_gradient(
    p_i: &Vec3,
    neighbors: &[Vec3],
    params: &CostParams,
    h: f64,
) -> Result<Vec3, ModelError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(ModelError::InvalidParams(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let mut grad = Vec3::zeros();
    for axis in 0..3 {
        let mut plus = *p_i;
        let mut minus = *p_i;
        plus[axis] += h;
        minus[axis] -= h;
        let f_plus = evaluate_cost(&plus, neighbors, params)?.total;
        let f_minus = evaluate_cost(&minus, neighbors, params)?.total;
        grad[axis] = (f_plus - f_minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Separation at which two isolated agents feel no net cohesion/separation pull.
///
/// Solves `w_coh * d * (d - 2 r_drone)^3 = w_sep` for `d > 2 r_drone`. With
/// `r_drone = 0` this is the fourth root of `w_sep / w_coh`; otherwise the
/// root is bracketed and bisected down to adjacent floats.
pub fn equilibrium_distance(w_coh: f64, w_sep: f64, r_drone: f64) -> Result<f64, ModelError> {
    if !(w_coh.is_finite() && w_coh > 0.0) {
        return Err(ModelError::NoEquilibrium(format!(
            "cohesion weight must be > 0, got {w_coh}"
        )));
    }
    if !(w_sep.is_finite() && w_sep > 0.0) {
        return Err(ModelError::NoEquilibrium(format!(
            "separation weight must be > 0, got {w_sep}"
        )));
    }
    if !(r_drone.is_finite() && r_drone >= 0.0) {
        return Err(ModelError::InvalidParams(format!(
            "r_drone must be >= 0, got {r_drone}"
        )));
    }
    if r_drone == 0.0 {
        return Ok((w_sep / w_coh).powf(0.25));
    }

    let two_r = 2.0 * r_drone;
    // Strictly increasing on (2r, inf), negative at 2r.
    let residual = |d: f64| w_coh * d * (d - two_r).powi(3) - w_sep;
    let mut lo = two_r;
    let mut span = 1.0;
    let mut hi = two_r + span;
    while residual(hi) < 0.0 {
        span *= 2.0;
        hi = two_r + span;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if residual(lo).abs() <= residual(hi).abs() {
        lo
    } else {
        hi
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_drone_params() -> CostParams {
        CostParams {
            w_coh: 20.0,
            w_sep: 9.0,
            w_tar: 0.0,
            w_obs: 0.0,
            r_drone: 0.0,
            ..CostParams::default()
        }
    }

    #[test]
    fn two_drone_cost() {
        let c = evaluate_cost(
            &Vec3::new(1.0, 0.0, 1.0),
            &[Vec3::new(0.0, 0.0, 1.0)],
            &two_drone_params(),
        )
        .unwrap();
        assert_eq!(c.coh, 20.0);
        assert_eq!(c.sep, 9.0);
        assert_eq!(c.tar, 0.0);
        assert_eq!(c.obs, 0.0);
        assert_eq!(c.total, 29.0);
    }

    #[test]
    fn target_term_uses_centroid_including_self() {
        let params = CostParams {
            w_tar: 150.0,
            target: Vec3::new(0.0, 0.0, 1.0),
            ..two_drone_params()
        };
        let c = evaluate_cost(
            &Vec3::new(1.0, 0.0, 1.0),
            &[Vec3::new(0.0, 0.0, 1.0)],
            &params,
        )
        .unwrap();
        assert!((c.tar - 37.5).abs() < 1e-12);
        assert!((c.total - 66.5).abs() < 1e-12);
    }

    #[test]
    fn coincident_neighbour_is_clamped() {
        let p = Vec3::new(0.3, -0.2, 1.0);
        let params = two_drone_params();
        let c = evaluate_cost(&p, &[p], &params).unwrap();
        assert!(c.sep.is_finite());
        assert_eq!(c.sep, 9.0 / (DEFAULT_ZERO_HAT * DEFAULT_ZERO_HAT));

        // Repulsion along +x: the gradient points the other way.
        let g = evaluate_gradient(&p, &[p], &params).unwrap();
        let mag = 2.0 * 9.0 / DEFAULT_ZERO_HAT.powi(3);
        assert_eq!(g.sep, Vec3::new(-mag, 0.0, 0.0));
    }

    #[test]
    fn zero_weight_terms_are_exactly_zero() {
        let params = CostParams {
            w_coh: 0.0,
            w_sep: 0.0,
            w_tar: 0.0,
            w_obs: 0.0,
            obstacles: vec![Obstacle::new(0.0, 0.0, 0.1)],
            ..CostParams::default()
        };
        // Agent inside the obstacle and on top of its neighbour.
        let p = Vec3::new(0.0, 0.0, 1.0);
        let c = evaluate_cost(&p, &[p], &params).unwrap();
        assert_eq!(c, CostBreakdown::default());
        let g = evaluate_gradient(&p, &[p], &params).unwrap();
        assert_eq!(g.total, Vec3::zeros());
    }

    #[test]
    fn lone_agent_seeks_target() {
        let params = CostParams {
            target: Vec3::new(1.0, 2.0, 3.0),
            ..CostParams::default()
        };
        let p = Vec3::new(0.0, 0.0, 1.0);
        let c = evaluate_cost(&p, &[], &params).unwrap();
        assert_eq!(c.coh, 0.0);
        assert_eq!(c.sep, 0.0);
        assert!((c.tar - 150.0 * 9.0).abs() < 1e-9);
        let g = evaluate_gradient(&p, &[], &params).unwrap();
        assert!((g.tar - 300.0 * (p - params.target)).norm() < 1e-9);
    }

    #[test]
    fn gradient_worked_examples() {
        let mut params = two_drone_params();
        let p = Vec3::new(1.0, 0.0, 1.0);
        let nb = [Vec3::new(0.0, 0.0, 1.0)];
        let g = evaluate_gradient(&p, &nb, &params).unwrap();
        assert_eq!(g.coh, Vec3::new(40.0, 0.0, 0.0));
        assert_eq!(g.sep, Vec3::new(-18.0, 0.0, 0.0));
        assert_eq!(g.total, Vec3::new(22.0, 0.0, 0.0));

        params.w_tar = 150.0;
        params.target = Vec3::new(0.0, 0.0, 1.0);
        let g = evaluate_gradient(&p, &nb, &params).unwrap();
        assert_eq!(g.tar, Vec3::new(75.0, 0.0, 0.0));
        assert_eq!(g.total, Vec3::new(97.0, 0.0, 0.0));

        let fd = finite_difference_gradient(&p, &nb, &params, 1e-6).unwrap();
        assert!((fd - g.total).norm() / g.total.norm() < 1e-5);
    }

    #[test]
    fn lone_agent_without_target_has_zero_gradient() {
        let params = CostParams {
            w_tar: 0.0,
            ..CostParams::default()
        };
        let p = Vec3::new(0.5, 0.5, 1.0);
        let g = evaluate_gradient(&p, &[], &params).unwrap();
        assert_eq!(g.total, Vec3::zeros());
        let fd = finite_difference_gradient(&p, &[], &params, 1e-6).unwrap();
        assert!(fd.norm() < 1e-6);
    }

    #[test]
    fn obstacle_gradient_is_planar_and_repulsive() {
        let params = CostParams {
            w_coh: 0.0,
            w_sep: 0.0,
            w_tar: 0.0,
            obstacles: vec![Obstacle::new(0.0, 0.0, 0.15)],
            ..CostParams::default()
        };
        let p = Vec3::new(0.6, 0.0, 2.5);
        let g = evaluate_gradient(&p, &[], &params).unwrap();
        assert_eq!(g.obs.z, 0.0);
        // Moving away from the obstacle lowers the cost.
        assert!(g.obs.x < 0.0);
        let fd = finite_difference_gradient(&p, &[], &params, 1e-6).unwrap();
        assert!((fd - g.total).norm() / g.total.norm() < 1e-6);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let params = CostParams::default();
        let bad = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            evaluate_cost(&bad, &[], &params),
            Err(ModelError::NonFinite(_))
        ));
        assert!(matches!(
            evaluate_gradient(&Vec3::zeros(), &[bad], &params),
            Err(ModelError::NonFinite(_))
        ));
        let params = CostParams {
            w_sep: -1.0,
            ..CostParams::default()
        };
        assert!(matches!(
            evaluate_cost(&Vec3::zeros(), &[], &params),
            Err(ModelError::InvalidParams(_))
        ));
    }

    #[test]
    fn equilibrium_values() {
        let d = equilibrium_distance(20.0, 9.0, 0.0).unwrap();
        assert_eq!(d, 0.45f64.powf(0.25));
        assert!((d - 0.81904).abs() < 1e-5);
        assert_eq!(equilibrium_distance(1.0, 1.0, 0.0).unwrap(), 1.0);
        // Root of 20 d (d - 0.14)^3 = 9, from an independent Brent solve.
        let d = equilibrium_distance(20.0, 9.0, 0.07).unwrap();
        assert!((d - 0.926_157_020_203_248_9).abs() < 1e-9, "{d}");
    }

    #[test]
    fn equilibrium_requires_cohesion() {
        assert!(matches!(
            equilibrium_distance(0.0, 9.0, 0.0),
            Err(ModelError::NoEquilibrium(_))
        ));
    }
}
