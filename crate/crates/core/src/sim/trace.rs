use std::io::Write;

use crate::model::CostBreakdown;
use crate::sim::ScenarioConfig;
use crate::Vec3;

/// Per-agent state captured at a control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRecord {
    pub position: Vec3,
    pub velocity: Vec3,
    /// The agent's own measured position.
    pub observed: Vec3,
    pub setpoint: Vec3,
    pub cost: CostBreakdown,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub time: f64,
    pub target: Option<Vec3>,
    pub agents: Vec<AgentRecord>,
}

impl TickRecord {
    pub fn true_positions(&self) -> Vec<Vec3> {
        self.agents.iter().map(|a| a.position).collect()
    }
}

/// A full rollout: the scenario that produced it plus one record per control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: ScenarioConfig,
    pub records: Vec<TickRecord>,
}

pub const CSV_HEADER: [&str; 20] = [
    "time_s",
    "agent",
    "px",
    "py",
    "pz",
    "vx",
    "vy",
    "vz",
    "ox",
    "oy",
    "oz",
    "spx",
    "spy",
    "spz",
    "cost_total",
    "cost_coh",
    "cost_sep",
    "cost_tar",
    "cost_obs",
    "grad_norm",
];

impl Trace {
    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }

    /// One row per agent per control tick, agents in id order.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let mut row: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
        for rec in &self.records {
            for (id, a) in rec.agents.iter().enumerate() {
                row.clear();
                row.push(rec.time.to_string());
                row.push(id.to_string());
                for v in [&a.position, &a.velocity, &a.observed, &a.setpoint] {
                    row.extend(v.iter().map(f64::to_string));
                }
                for c in [
                    a.cost.total,
                    a.cost.coh,
                    a.cost.sep,
                    a.cost.tar,
                    a.cost.obs,
                    a.grad_norm,
                ] {
                    row.push(c.to_string());
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        buf
    }
}
