use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use flockspc::controller::ControllerKind;
use flockspc::llc::LlcFamily;
use flockspc::metrics::{
    render_markdown_table, seed_statistics, summarize, CellStatistics, RunSummary,
};
use flockspc::sim::layouts::{self, ObstacleLayout};
use flockspc::sim::{run_scenario, ScenarioConfig};

use crate::{create_dir, to_json, violation_message, write_file, Failure, Format};

/// Environment variable capping the number of concurrent sweep runs.
const THREADS_VAR: &str = "FLOCKSPC_THREADS";

/// A grid of runs. Every run starts from the preset scenario for its
/// flock size, layout, controller and LLC family.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub flock_sizes: Vec<usize>,
    pub obstacle_scenarios: Vec<ObstacleLayout>,
    pub controllers: Vec<ControllerKind>,
    pub llc_families: Vec<LlcFamily>,
    pub seeds: Vec<u64>,
    /// Overrides the preset run length, s.
    #[serde(default)]
    pub duration: Option<f64>,
    /// Overrides the preset sensor noise, m.
    #[serde(default)]
    pub noise_sigma: Option<f64>,
}

impl SweepSpec {
    fn validate(&self) -> anyhow::Result<()> {
        let empty = [
            ("flock_sizes", self.flock_sizes.is_empty()),
            ("obstacle_scenarios", self.obstacle_scenarios.is_empty()),
            ("controllers", self.controllers.is_empty()),
            ("llc_families", self.llc_families.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        let missing: Vec<&str> = empty.iter().filter(|(_, e)| *e).map(|(n, _)| *n).collect();
        anyhow::ensure!(
            missing.is_empty(),
            "sweep lists must be non-empty: {}",
            missing.join(", ")
        );
        Ok(())
    }

    /// Every run in grid order: size, layout, controller, family, seed.
    fn runs(&self) -> Vec<(String, ScenarioConfig)> {
        let mut out = Vec::new();
        for &n in &self.flock_sizes {
            for layout in &self.obstacle_scenarios {
                for &kind in &self.controllers {
                    for &family in &self.llc_families {
                        for &seed in &self.seeds {
                            let mut cfg = layouts::scenario(n, layout, kind, family, seed);
                            if let Some(d) = self.duration {
                                cfg.duration = d;
                            }
                            if let Some(s) = self.noise_sigma {
                                cfg.noise_sigma = s;
                            }
                            let name = format!(
                                "n{n}_{}_{}_{}_s{seed}",
                                layout.name,
                                kind.label().to_lowercase(),
                                family.label().to_lowercase()
                            );
                            out.push((name, cfg));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    runs: &'a [RunSummary],
    cells: Vec<CellStatistics>,
    all_passed: bool,
}

fn thread_count() -> anyhow::Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_VAR}={v:?} is not a thread count"))?;
            anyhow::ensure!(n >= 1, "{THREADS_VAR} must be >= 1");
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn summary_csv(runs: &[RunSummary]) -> anyhow::Result<Vec<u8>> {
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "agents",
        "obstacles",
        "controller",
        "llc",
        "seed",
        "min_dist_min",
        "max_comp_max",
        "min_clear_obj",
        "passed",
    ])?;
    for s in runs {
        w.write_record([
            s.agent_count.to_string(),
            s.obstacle_count.to_string(),
            s.controller.label().to_string(),
            s.llc_family.label().to_string(),
            s.seed.to_string(),
            opt(s.min_dist_min),
            s.max_comp_max.to_string(),
            opt(s.min_clear_obj),
            s.passed().to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn run(
    spec_path: &Path,
    out: &Path,
    strict: bool,
    traces: bool,
    format: Format,
) -> Result<(), Failure> {
    let text = fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))
        .map_err(Failure::Config)?;
    let spec: SweepSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", spec_path.display()))
        .map_err(Failure::Config)?;
    spec.validate().map_err(Failure::Config)?;
    let runs = spec.runs();
    for (name, cfg) in &runs {
        cfg.validate()
            .with_context(|| format!("run {name}"))
            .map_err(Failure::Config)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count().map_err(Failure::Config)?)
        .build()
        .context("building thread pool")?;
    // Each run is independent and deterministic; collect keeps grid order.
    let results: Vec<anyhow::Result<(RunSummary, Option<Vec<u8>>)>> = pool.install(|| {
        runs.par_iter()
            .map(|(name, cfg)| {
                let trace = run_scenario(cfg).with_context(|| format!("run {name}"))?;
                let summary = summarize(&trace).with_context(|| format!("run {name}"))?;
                Ok((summary, traces.then(|| trace.to_csv_bytes())))
            })
            .collect()
    });

    create_dir(out)?;
    let runs_dir = out.join("runs");
    create_dir(&runs_dir)?;
    let mut summaries = Vec::with_capacity(runs.len());
    for ((name, _), result) in runs.iter().zip(results) {
        let (summary, trace) = result?;
        write_file(&runs_dir.join(format!("{name}.json")), &to_json(&summary))?;
        if let Some(csv) = trace {
            write_file(&runs_dir.join(format!("{name}.csv")), &csv)?;
        }
        summaries.push(summary);
    }

    let table = render_markdown_table(&summaries);
    write_file(&out.join("table.md"), table.as_bytes())?;
    let report = SweepReport {
        runs: &summaries,
        cells: seed_statistics(&summaries),
        all_passed: summaries.iter().all(RunSummary::passed),
    };
    let json = to_json(&report);
    write_file(&out.join("sweep.json"), &json)?;

    let stdout = match format {
        Format::Md => table.into_bytes(),
        Format::Json => json,
        Format::Csv => summary_csv(&summaries)?,
    };
    io::stdout().write_all(&stdout).context("writing stdout")?;

    if strict {
        let failed: Vec<String> = summaries
            .iter()
            .filter(|s| !s.passed())
            .map(violation_message)
            .collect();
        if !failed.is_empty() {
            return Err(Failure::Violation(format!(
                "{} of {} runs failed\n{}",
                failed.len(),
                summaries.len(),
                failed.join("\n")
            )));
        }
    }
    Ok(())
}
