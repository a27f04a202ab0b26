//! High-level controllers that turn a local observation into an LLC setpoint.
//!
//! SPC walks along the negative cost gradient in `n` steps of length
//! `epsilon` and picks the cheapest point. PFC steps by `-k * gradient`
//! directly. Both read only the agent's own observed position and its
//! neighbours' observed positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llc::LlcFamily;
use crate::model::{evaluate_cost, evaluate_gradient, CostBreakdown, CostParams, ModelError};
use crate::{is_finite3, Vec3};

/// Gradient norm below which an agent holds its current position.
pub const HOLD_GRADIENT_NORM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("gradient has zero length; no descent direction")]
    DegenerateGradient,
    #[error("controller kind mismatch: expected {expected:?}, got {got:?}")]
    WrongKind {
        expected: ControllerKind,
        got: ControllerKind,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Spc,
    Pfc,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Spc => "SPC",
            ControllerKind::Pfc => "PFC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Spacing between SPC candidates, metres.
    pub epsilon: f64,
    /// Base number of SPC candidates.
    pub n_star: u32,
    /// PFC step gain, metres per unit gradient.
    pub pfc_gain: f64,
    /// Scale the candidate count with distance to the target.
    #[serde(default = "default_true")]
    pub dynamic_n: bool,
}

fn default_true() -> bool {
    true
}

impl ControllerConfig {
    pub fn spc(epsilon: f64, n_star: u32) -> Self {
        Self {
            kind: ControllerKind::Spc,
            epsilon,
            n_star,
            pfc_gain: 0.007,
            dynamic_n: true,
        }
    }

    pub fn pfc(gain: f64) -> Self {
        Self {
            kind: ControllerKind::Pfc,
            epsilon: 0.06,
            n_star: 5,
            pfc_gain: gain,
            dynamic_n: false,
        }
    }

    pub fn with_dynamic_n(mut self, dynamic_n: bool) -> Self {
        self.dynamic_n = dynamic_n;
        self
    }

    /// Simulation parameters tuned for each LLC family.
    ///
    /// | family | N* | epsilon | PFC gain |
    /// |--------|----|---------|----------|
    /// | A      | 5  | 0.06 m  | 0.007 m  |
    /// | B      | 3  | 0.06 m  | 0.005 m  |
    pub fn preset(kind: ControllerKind, family: LlcFamily) -> Self {
        let (n_star, pfc_gain) = match family {
            LlcFamily::A => (5, 0.007),
            LlcFamily::B => (3, 0.005),
        };
        Self {
            kind,
            epsilon: 0.06,
            n_star,
            pfc_gain,
            dynamic_n: kind == ControllerKind::Spc,
        }
    }

    /// Parameters used on real hardware: shorter lookahead, no PFC.
    pub fn hardware_preset() -> Self {
        Self::spc(0.025, 3)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ControllerError::InvalidConfig(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.n_star < 1 {
            return Err(ControllerError::InvalidConfig("n_star must be >= 1".into()));
        }
        if self.kind == ControllerKind::Pfc && !(self.pfc_gain.is_finite() && self.pfc_gain > 0.0) {
            return Err(ControllerError::InvalidConfig(format!(
                "pfc_gain must be > 0, got {}",
                self.pfc_gain
            )));
        }
        Ok(())
    }
}

/// Position handed to the low-level controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub position: Vec3,
}

/// Candidate count scaled by distance to the target:
/// `ceil(n_star * clamp(1.5 * (dist + 0.5), 1, 3))`.
pub fn dynamic_lookahead_count(n_star: u32, dist_to_target: f64) -> u32 {
    let factor = (1.5 * (dist_to_target.max(0.0) + 0.5)).clamp(1.0, 3.0);
    // Absorb rounding in the product so that e.g. 5 * 1.2 stays 6.
    let raw = n_star as f64 * factor;
    let n = (raw - 1e-9).ceil() as u32;
    n.clamp(n_star, 3 * n_star)
}

/// Points `p_i - m * epsilon * g / |g|` for `m = 1..=n`.
pub fn build_candidate_set(
    p_i: &Vec3,
    gradient: &Vec3,
    epsilon: f64,
    n: u32,
) -> Result<Vec<Vec3>, ControllerError> {
    let norm = gradient.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(ControllerError::DegenerateGradient);
    }
    if n < 1 {
        return Err(ControllerError::InvalidConfig(
            "candidate count must be >= 1".into(),
        ));
    }
    let step = -epsilon * (gradient / norm);
    Ok((1..=n).map(|m| p_i + m as f64 * step).collect())
}

/// The evaluated lookahead of one SPC decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookahead {
    pub candidates: Vec<Vec3>,
    pub costs: Vec<f64>,
    pub chosen: usize,
}

/// Everything a controller computed for one agent at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub setpoint: Setpoint,
    pub cost: CostBreakdown,
    pub gradient: Vec3,
    /// Present for SPC when the agent did not hold position.
    pub lookahead: Option<Lookahead>,
}

fn check_position(p_i: &Vec3) -> Result<(), ControllerError> {
    if is_finite3(p_i) {
        Ok(())
    } else {
        Err(ModelError::NonFinite("agent position").into())
    }
}

fn lookahead_count(p_i: &Vec3, params: &CostParams, cfg: &ControllerConfig) -> u32 {
    if !cfg.dynamic_n {
        return cfg.n_star;
    }
    // Without a target term there is nothing to hurry towards.
    let dist = if params.w_tar > 0.0 {
        (p_i - params.target).norm()
    } else {
        0.0
    };
    dynamic_lookahead_count(cfg.n_star, dist)
}

/// Run whichever controller `cfg` selects.
pub fn decide(
    p_i: &Vec3,
    neighbors: &[Vec3],
    params: &CostParams,
    cfg: &ControllerConfig,
) -> Result<Decision, ControllerError> {
    cfg.validate()?;
    check_position(p_i)?;
    let cost = evaluate_cost(p_i, neighbors, params)?;
    let gradient = evaluate_gradient(p_i, neighbors, params)?.total;

    match cfg.kind {
        ControllerKind::Pfc => Ok(Decision {
            setpoint: Setpoint {
                position: p_i - cfg.pfc_gain * gradient,
            },
            cost,
            gradient,
            lookahead: None,
        }),
        ControllerKind::Spc => {
            if gradient.norm() < HOLD_GRADIENT_NORM {
                return Ok(Decision {
                    setpoint: Setpoint { position: *p_i },
                    cost,
                    gradient,
                    lookahead: None,
                });
            }
            let n = lookahead_count(p_i, params, cfg);
            let candidates = build_candidate_set(p_i, &gradient, cfg.epsilon, n)?;
            let costs = candidates
                .iter()
                .map(|c| evaluate_cost(c, neighbors, params).map(|b| b.total))
                .collect::<Result<Vec<_>, _>>()?;
            // First minimum wins, i.e. the nearest of equally cheap candidates.
            let chosen = costs
                .iter()
                .enumerate()
                .fold(0, |best, (m, c)| if *c < costs[best] { m } else { best });
            Ok(Decision {
                setpoint: Setpoint {
                    position: candidates[chosen],
                },
                cost,
                gradient,
                lookahead: Some(Lookahead {
                    candidates,
                    costs,
                    chosen,
                }),
            })
        }
    }
}

fn expect_kind(cfg: &ControllerConfig, expected: ControllerKind) -> Result<(), ControllerError> {
    if cfg.kind == expected {
        Ok(())
    } else {
        Err(ControllerError::WrongKind {
            expected,
            got: cfg.kind,
        })
    }
}

/// Cheapest point of the gradient lookahead, or `p_i` when the gradient vanishes.
pub fn spc_setpoint(
    p_i: &Vec3,
    neighbors: &[Vec3],
    params: &CostParams,
    cfg: &ControllerConfig,
) -> Result<Setpoint, ControllerError> {
    expect_kind(cfg, ControllerKind::Spc)?;
    Ok(decide(p_i, neighbors, params, cfg)?.setpoint)
}

/// `p_i - k * grad c(p_i)`.
pub fn pfc_setpoint(
    p_i: &Vec3,
    neighbors: &[Vec3],
    params: &CostParams,
    cfg: &ControllerConfig,
) -> Result<Setpoint, ControllerError> {
    expect_kind(cfg, ControllerKind::Pfc)?;
    Ok(decide(p_i, neighbors, params, cfg)?.setpoint)
}
