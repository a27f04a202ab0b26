mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use flockspc::llc::{step_response, LlcConfig, LlcFamily};
use flockspc::metrics::{render_markdown_table, summarize, RunSummary};
use flockspc::model::equilibrium_distance;
use flockspc::sim::{layouts, run_scenario, ScenarioConfig, SimError};

/// Exit status for configuration and usage problems (clap uses the same).
const EXIT_CONFIG: u8 = 2;
/// Exit status when `--strict` is set and a quality threshold is violated.
const EXIT_VIOLATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "flockspc",
    version,
    about = "Spatial predictive flocking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Md,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and summary.json into --out.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 3 if any quality threshold is violated.
        #[arg(long)]
        strict: bool,
        /// What to print on stdout: the trace (csv), the summary (json) or a table row (md).
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run every combination of a sweep spec; writes per-run summaries,
    /// table.md and sweep.json into --out.
    Sweep {
        #[arg(long, visible_alias = "scenario")]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
        /// Also write every run's trace CSV.
        #[arg(long)]
        traces: bool,
        /// What to print on stdout: per-run rows (csv), the sweep summary (json) or the table (md).
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Single-axis step response of an LLC family; writes step_<family>.csv and .json into --out.
    StepResponse {
        family: LlcFamily,
        #[arg(default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 15.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
    },
    /// Two-agent equilibrium spacing for the given weights.
    Equilibrium {
        w_coh: f64,
        w_sep: f64,
        #[arg(default_value_t = 0.0)]
        r_drone: f64,
        /// Confirm with a noiseless two-agent rollout (status 3 if off by more than 5%).
        #[arg(long)]
        verify: bool,
    },
}

/// Failure classes mapped onto exit statuses.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Violation(String),
    Runtime(anyhow::Error),
}

impl Failure {
    fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure::Config(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("quality violation: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            scenario,
            out,
            seed,
            strict,
            format,
        } => simulate(&scenario, &out, seed, strict, format),
        Command::Sweep {
            spec,
            out,
            strict,
            traces,
            format,
        } => sweep::run(&spec, &out, strict, traces, format),
        Command::StepResponse {
            family,
            step,
            out,
            duration,
            dt,
        } => step_cmd(family, step, &out, duration, dt),
        Command::Equilibrium {
            w_coh,
            w_sep,
            r_drone,
            verify,
        } => equilibrium(w_coh, w_sep, r_drone, verify),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("summaries serialise");
    s.push('\n');
    s.into_bytes()
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Config(_) => Failure::config(e),
        other => Failure::Runtime(other.into()),
    }
}

fn violation_message(s: &RunSummary) -> String {
    format!(
        "{} agents, {} obstacles, {}/{} seed {}: min dist {:?} (thr {}), max comp {} (thr {}), min clear {:?} (thr {})",
        s.agent_count,
        s.obstacle_count,
        s.controller.label(),
        s.llc_family.label(),
        s.seed,
        s.min_dist_min,
        s.thresholds.dist_thr,
        s.max_comp_max,
        s.thresholds.comp_thr,
        s.min_clear_obj,
        s.thresholds.clear_thr,
    )
}

fn simulate(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    strict: bool,
    format: Format,
) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::from_path(scenario).map_err(Failure::config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let trace = run_scenario(&cfg).map_err(sim_failure)?;
    let summary = summarize(&trace).map_err(Failure::config)?;

    create_dir(out)?;
    let csv = trace.to_csv_bytes();
    write_file(&out.join("trace.csv"), &csv)?;
    let json = to_json(&summary);
    write_file(&out.join("summary.json"), &json)?;

    let stdout = match format {
        Format::Csv => csv,
        Format::Json => json,
        Format::Md => render_markdown_table(std::slice::from_ref(&summary)).into_bytes(),
    };
    io::stdout().write_all(&stdout).context("writing stdout")?;

    if strict && !summary.passed() {
        return Err(Failure::Violation(violation_message(&summary)));
    }
    Ok(())
}

fn step_cmd(
    family: LlcFamily,
    size: f64,
    out: &Path,
    duration: f64,
    dt: f64,
) -> Result<(), Failure> {
    let cfg = LlcConfig::for_family(family);
    let resp = step_response(&cfg, size, duration, dt).map_err(Failure::config)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time_s", "position", "velocity", "tilt"])
        .context("formatting csv")?;
    for s in &resp.samples {
        w.write_record([s.time, s.position, s.velocity, s.tilt].map(|x| x.to_string()))
            .context("formatting csv")?;
    }
    let csv = w.into_inner().context("formatting csv")?;

    create_dir(out)?;
    let stem = format!("step_{}", family.label());
    write_file(&out.join(format!("{stem}.csv")), &csv)?;
    let json = to_json(&resp.metrics);
    write_file(&out.join(format!("{stem}.json")), &json)?;
    io::stdout().write_all(&json).context("writing stdout")?;
    Ok(())
}

fn equilibrium(w_coh: f64, w_sep: f64, r_drone: f64, verify: bool) -> Result<(), Failure> {
    let d = equilibrium_distance(w_coh, w_sep, r_drone).map_err(Failure::config)?;
    println!("equilibrium distance: {d:.5} m");
    if !verify {
        return Ok(());
    }

    // Start well away from the equilibrium so the rollout has to find it.
    let cfg = layouts::pair_scenario(w_coh, w_sep, r_drone, 2.0 * d, 30.0);
    let trace = run_scenario(&cfg).map_err(sim_failure)?;
    let tail = trace.records.len().min(50);
    let mean = trace.records[trace.records.len() - tail..]
        .iter()
        .map(|r| (r.agents[0].position - r.agents[1].position).norm())
        .sum::<f64>()
        / tail as f64;
    let rel = (mean - d).abs() / d;
    println!(
        "rollout separation: {mean:.5} m after {} s ({:.2}% off)",
        cfg.duration,
        100.0 * rel
    );
    if rel > 0.05 {
        return Err(Failure::Violation(format!(
            "rollout separation {mean:.5} m is more than 5% from {d:.5} m"
        )));
    }
    Ok(())
}
