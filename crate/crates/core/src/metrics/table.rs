use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerKind;
use crate::llc::LlcFamily;
use crate::metrics::{RunSummary, Verdict};

/// Minimum and median of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedStat {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl SeedStat {
    fn of(values: &mut [f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            0.5 * (values[n / 2 - 1] + values[n / 2])
        };
        Some(Self {
            min: values[0],
            median,
            max: values[n - 1],
        })
    }
}

/// Per-cell statistics across the seeds of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStatistics {
    pub agent_count: usize,
    pub obstacle_count: usize,
    pub controller: ControllerKind,
    pub llc_family: LlcFamily,
    pub seeds: Vec<u64>,
    pub dist_min: Option<SeedStat>,
    pub comp_max: SeedStat,
    pub clear_obj: Option<SeedStat>,
    /// Seeds on which every verdict passed.
    pub passing_seeds: usize,
}

type CellKey = (usize, usize, ControllerKind, LlcFamily);

fn key(s: &RunSummary) -> CellKey {
    (s.agent_count, s.obstacle_count, s.controller, s.llc_family)
}

fn group(summaries: &[RunSummary]) -> BTreeMap<CellKey, Vec<&RunSummary>> {
    let mut cells: BTreeMap<CellKey, Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        cells.entry(key(s)).or_default().push(s);
    }
    cells
}

/// Group runs by (flock size, obstacle count, controller, LLC) and reduce
/// each group across seeds.
pub fn seed_statistics(summaries: &[RunSummary]) -> Vec<CellStatistics> {
    group(summaries)
        .into_iter()
        .map(|((agents, obstacles, controller, family), runs)| {
            let mut dist: Vec<f64> = runs.iter().filter_map(|r| r.min_dist_min).collect();
            let mut comp: Vec<f64> = runs.iter().map(|r| r.max_comp_max).collect();
            let mut clear: Vec<f64> = runs.iter().filter_map(|r| r.min_clear_obj).collect();
            CellStatistics {
                agent_count: agents,
                obstacle_count: obstacles,
                controller,
                llc_family: family,
                seeds: runs.iter().map(|r| r.seed).collect(),
                dist_min: SeedStat::of(&mut dist),
                comp_max: SeedStat::of(&mut comp).expect("group is non-empty"),
                clear_obj: SeedStat::of(&mut clear),
                passing_seeds: runs.iter().filter(|r| r.passed()).count(),
            }
        })
        .collect()
}

fn mark(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "✓",
        Verdict::Fail => "✗",
    }
}

fn cell(value: Option<f64>, verdict: Option<Verdict>) -> String {
    match (value, verdict) {
        (Some(x), Some(v)) => format!("{x:.2} {}", mark(v)),
        (Some(x), None) => format!("{x:.2}"),
        _ => "-".to_string(),
    }
}

/// Worst case over seeds of one cell, with the verdict of the worst run.
struct Worst {
    dist: (Option<f64>, Option<Verdict>),
    comp: (Option<f64>, Option<Verdict>),
    clear: (Option<f64>, Option<Verdict>),
}

fn worst(runs: &[&RunSummary]) -> Worst {
    let pick = |vals: Vec<(f64, Option<Verdict>)>, lower_is_worse: bool| {
        vals.into_iter()
            .reduce(|a, b| {
                let b_worse = if lower_is_worse { b.0 < a.0 } else { b.0 > a.0 };
                if b_worse {
                    b
                } else {
                    a
                }
            })
            .map_or((None, None), |(x, v)| (Some(x), v))
    };
    Worst {
        dist: pick(
            runs.iter()
                .filter_map(|r| r.min_dist_min.map(|d| (d, r.dist_verdict)))
                .collect(),
            true,
        ),
        comp: pick(
            runs.iter()
                .map(|r| (r.max_comp_max, Some(r.comp_verdict)))
                .collect(),
            false,
        ),
        clear: pick(
            runs.iter()
                .filter_map(|r| r.min_clear_obj.map(|d| (d, r.clear_verdict)))
                .collect(),
            true,
        ),
    }
}

/// Markdown table with one row per (flock size, obstacle count) and, for every
/// controller and LLC family present, the worst case across seeds of
/// `dist_min`, `comp_max` and `clear_obj`.
///
/// Cells without obstacles show `-` for clearance; missing combinations
/// show `-` throughout.
pub fn render_markdown_table(summaries: &[RunSummary]) -> String {
    let cells = group(summaries);
    let rows: BTreeSet<(usize, usize)> = cells.keys().map(|k| (k.0, k.1)).collect();
    let columns: BTreeSet<(ControllerKind, LlcFamily)> = cells.keys().map(|k| (k.2, k.3)).collect();

    let mut out = String::new();
    out.push_str("| Drones | Obstacles |");
    for (c, f) in &columns {
        for metric in ["dist_min", "comp_max", "clear_obj"] {
            let _ = write!(out, " {} {} {metric} |", c.label(), f.label());
        }
    }
    out.push('\n');
    out.push_str("|---:|---:|");
    for _ in 0..columns.len() * 3 {
        out.push_str("---:|");
    }
    out.push('\n');

    for (agents, obstacles) in &rows {
        let _ = write!(out, "| {agents} | {obstacles} |");
        for (c, f) in &columns {
            match cells.get(&(*agents, *obstacles, *c, *f)) {
                Some(runs) => {
                    let w = worst(runs);
                    for (v, verdict) in [w.dist, w.comp, w.clear] {
                        let _ = write!(out, " {} |", cell(v, verdict));
                    }
                }
                None => out.push_str(" - | - | - |"),
            }
        }
        out.push('\n');
    }
    out
}
