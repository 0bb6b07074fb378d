use serde::{Deserialize, Serialize};

use crate::trace::{DependencyGraph, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// As-soon-as-possible over every dependency, unbounded width, unit latency.
    IdealIlp,
    /// Block instances run as sequential tasks; every dependency is honored.
    BblpReal,
    /// As `BblpReal`, but dependencies out of loop-index updates are ignored.
    BblpSmart,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleResult {
    pub regime: Regime,
    /// 1-based issue cycle of each event.
    pub issue_cycle: Vec<u64>,
    /// Zero only for an empty trace.
    pub max_issue_cycle: u64,
}

impl ScheduleResult {
    fn new(regime: Regime, issue_cycle: Vec<u64>) -> Self {
        let max_issue_cycle = issue_cycle.iter().copied().max().unwrap_or(0);
        ScheduleResult {
            regime,
            issue_cycle,
            max_issue_cycle,
        }
    }
}

pub fn schedule_ideal(trace: &Trace, deps: &DependencyGraph) -> ScheduleResult {
    let mut cycle = vec![0u64; trace.len()];
    for i in 0..trace.len() {
        cycle[i] = 1 + deps
            .incoming(i)
            .iter()
            .map(|e| cycle[e.producer])
            .max()
            .unwrap_or(0);
    }
    ScheduleResult::new(Regime::IdealIlp, cycle)
}

/// Block instances start one cycle after every instance they depend on has
/// finished and then issue one instruction per cycle. Edges inside an
/// instance never delay its start.
pub fn schedule_bblp(trace: &Trace, deps: &DependencyGraph, smart: bool) -> ScheduleResult {
    let runs = trace.block_instances();
    let mut instance_of = vec![0usize; trace.len()];
    for (k, run) in runs.iter().enumerate() {
        instance_of[run.clone()].fill(k);
    }
    let mut finish = vec![0u64; runs.len()];
    let mut cycle = vec![0u64; trace.len()];
    for (k, run) in runs.iter().enumerate() {
        let ready = run
            .clone()
            .flat_map(|i| deps.incoming(i))
            .filter(|e| e.producer < run.start)
            .filter(|e| !(smart && deps.is_index_update_edge(e)))
            .map(|e| finish[instance_of[e.producer]])
            .max()
            .unwrap_or(0);
        for (offset, i) in run.clone().enumerate() {
            cycle[i] = ready + 1 + offset as u64;
        }
        finish[k] = ready + run.len() as u64;
    }
    let regime = if smart {
        Regime::BblpSmart
    } else {
        Regime::BblpReal
    };
    ScheduleResult::new(regime, cycle)
}
