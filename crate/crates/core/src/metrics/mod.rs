//! Flock-quality metrics and pass/fail verdicts.
//!
//! All metrics are computed on *true* positions:
//!
//! - `dist_min`: smallest distance between any two agents (collision avoidance)
//! - `comp_max`: largest distance of any agent from the flock centroid (compactness)
//! - `clear_obj`: smallest xy distance from any agent to any obstacle centre
//!   (obstacle clearance)
//!
//! A run passes a metric when `min(dist_min) > dist_thr`,
//! `max(comp_max) < comp_thr` and `min(clear_obj) > clear_thr` over the
//! post-formation window. Equality fails.

mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControllerKind;
use crate::llc::LlcFamily;
use crate::model::Obstacle;
use crate::sim::Trace;
use crate::{project_xy, Vec3};

pub use table::{render_markdown_table, seed_statistics, CellStatistics, SeedStat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no agents to measure")]
    NoAgents,
    #[error("no samples at or after the formation time {0} s")]
    EmptyWindow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub time: f64,
    /// Absent with fewer than two agents.
    pub dist_min: Option<f64>,
    pub comp_max: f64,
    /// Absent without obstacles.
    pub clear_obj: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub dist_thr: f64,
    pub comp_thr: f64,
    pub clear_thr: f64,
}

/// `dist_thr = 2 r_drone + r_safety`, `clear_thr = r_drone + r_k + r_safety`.
pub fn thresholds_from_geometry(
    r_drone: f64,
    r_safety: f64,
    r_k: f64,
    comp_thr: f64,
) -> Thresholds {
    Thresholds {
        dist_thr: 2.0 * r_drone + r_safety,
        comp_thr,
        clear_thr: r_drone + r_k + r_safety,
    }
}

/// Thresholds implied by a trace's scenario; `r_k` is the largest obstacle radius.
pub fn thresholds_for(trace: &Trace) -> Thresholds {
    let s = &trace.scenario;
    let r_k = s.obstacles.iter().map(|o| o.radius).fold(0.0, f64::max);
    thresholds_from_geometry(s.cost.r_drone, s.r_safety, r_k, s.comp_thr)
}

/// Metrics for one configuration of true positions. `time` is left at zero.
pub fn compute_metrics(
    positions: &[Vec3],
    obstacles: &[Obstacle],
) -> Result<MetricsSample, MetricsError> {
    if positions.is_empty() {
        return Err(MetricsError::NoAgents);
    }
    let mut dist_min: Option<f64> = None;
    for (i, p) in positions.iter().enumerate() {
        for q in &positions[i + 1..] {
            let d = (p - q).norm();
            dist_min = Some(dist_min.map_or(d, |m| m.min(d)));
        }
    }
    // Offsets from the first agent keep coincident flocks at exactly zero.
    let origin = positions[0];
    let mean_offset = positions
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + (p - origin))
        / positions.len() as f64;
    let centroid = origin + mean_offset;
    let comp_max = positions
        .iter()
        .map(|p| (centroid - p).norm())
        .fold(0.0, f64::max);
    let clear_obj = obstacles
        .iter()
        .flat_map(|k| {
            positions
                .iter()
                .map(move |p| (project_xy(p) - k.center_xy).norm())
        })
        .reduce(f64::min);
    Ok(MetricsSample {
        time: 0.0,
        dist_min,
        comp_max,
        clear_obj,
    })
}

/// Metric samples for every control tick of a trace.
pub fn trace_metrics(trace: &Trace) -> Result<Vec<MetricsSample>, MetricsError> {
    trace
        .records
        .iter()
        .map(|rec| {
            compute_metrics(&rec.true_positions(), &trace.scenario.obstacles).map(|m| {
                MetricsSample {
                    time: rec.time,
                    ..m
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// Aggregates over the post-formation window of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent_count: usize,
    pub obstacle_count: usize,
    pub controller: ControllerKind,
    pub llc_family: LlcFamily,
    pub seed: u64,
    pub formation_time: f64,
    pub window_samples: usize,
    pub thresholds: Thresholds,
    pub min_dist_min: Option<f64>,
    pub max_comp_max: f64,
    pub min_clear_obj: Option<f64>,
    pub dist_verdict: Option<Verdict>,
    pub comp_verdict: Verdict,
    pub clear_verdict: Option<Verdict>,
    /// Window samples with `dist_min <= dist_thr`.
    pub dist_violations: usize,
    /// Window samples with `clear_obj <= clear_thr`.
    pub clear_violations: usize,
}

impl RunSummary {
    /// True when every present verdict passes.
    pub fn passed(&self) -> bool {
        self.comp_verdict.is_pass()
            && self.dist_verdict.is_none_or(Verdict::is_pass)
            && self.clear_verdict.is_none_or(Verdict::is_pass)
    }
}

/// Reduce a trace to its window aggregates and verdicts.
pub fn aggregate(
    trace: &Trace,
    thresholds: &Thresholds,
    formation_time: f64,
) -> Result<RunSummary, MetricsError> {
    let window: Vec<MetricsSample> = trace_metrics(trace)?
        .into_iter()
        .filter(|m| m.time >= formation_time)
        .collect();
    if window.is_empty() {
        return Err(MetricsError::EmptyWindow(formation_time));
    }
    let min_opt = |vals: &mut dyn Iterator<Item = f64>| vals.reduce(f64::min);
    let min_dist_min = min_opt(&mut window.iter().filter_map(|m| m.dist_min));
    let min_clear_obj = min_opt(&mut window.iter().filter_map(|m| m.clear_obj));
    let max_comp_max = window.iter().map(|m| m.comp_max).fold(0.0, f64::max);

    let dist_violations = window
        .iter()
        .filter_map(|m| m.dist_min)
        .filter(|d| *d <= thresholds.dist_thr)
        .count();
    let clear_violations = window
        .iter()
        .filter_map(|m| m.clear_obj)
        .filter(|d| *d <= thresholds.clear_thr)
        .count();

    let s = &trace.scenario;
    Ok(RunSummary {
        agent_count: s.agent_count,
        obstacle_count: s.obstacles.len(),
        controller: s.controller.kind,
        llc_family: s.llc.family,
        seed: s.seed,
        formation_time,
        window_samples: window.len(),
        thresholds: *thresholds,
        min_dist_min,
        max_comp_max,
        min_clear_obj,
        dist_verdict: min_dist_min.map(|d| Verdict::from_bool(d > thresholds.dist_thr)),
        comp_verdict: Verdict::from_bool(max_comp_max < thresholds.comp_thr),
        clear_verdict: min_clear_obj.map(|d| Verdict::from_bool(d > thresholds.clear_thr)),
        dist_violations,
        clear_violations,
    })
}

/// [`aggregate`] with the scenario's own thresholds and formation time.
pub fn summarize(trace: &Trace) -> Result<RunSummary, MetricsError> {
    aggregate(trace, &thresholds_for(trace), trace.scenario.formation_time)
}
