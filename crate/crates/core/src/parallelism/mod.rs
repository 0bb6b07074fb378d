//! Parallelism metrics over dependency-graph schedules.
//!
//! Three schedules are derived from one [`DependencyGraph`]: the ideal
//! as-soon-as-possible schedule behind ILP and DLP, and two block-level
//! schedules (all dependencies, or all but loop-index updates) behind BBLP.

mod pbblp;
mod schedule;
mod scores;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use pbblp::{pbblp, PbblpResult};
pub use schedule::{schedule_bblp, schedule_ideal, Regime, ScheduleResult};
pub use scores::{bblp, dlp, ilp_specialized, ilp_specialized_all, ilp_total};

use crate::trace::{DependencyGraph, Trace};
use crate::Undefined;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelismReport {
    pub ilp_total: f64,
    /// Keyed by opcode name.
    pub ilp_specialized: BTreeMap<String, f64>,
    pub dlp1: f64,
    pub dlp2: f64,
    pub bblp_real: f64,
    pub bblp_smart: f64,
    /// `None` when no block is eligible; see `pbblp_undefined`.
    pub pbblp: Option<f64>,
    pub pbblp_undefined: Option<String>,
    pub per_block_pbblp: BTreeMap<u64, f64>,
}

/// All parallelism scores. The three schedules run on separate threads.
pub fn parallelism_report(
    trace: &Trace,
    deps: &DependencyGraph,
) -> Result<ParallelismReport, Undefined> {
    if trace.is_empty() {
        return Err(Undefined::EmptyTrace);
    }
    let (ideal, real, smart, potential) = std::thread::scope(|scope| {
        let ideal = scope.spawn(|| schedule_ideal(trace, deps));
        let real = scope.spawn(|| schedule_bblp(trace, deps, false));
        let smart = scope.spawn(|| schedule_bblp(trace, deps, true));
        let potential = pbblp(trace, deps);
        (
            ideal.join().expect("ideal scheduler panicked"),
            real.join().expect("block scheduler panicked"),
            smart.join().expect("block scheduler panicked"),
            potential,
        )
    });
    Ok(ParallelismReport {
        ilp_total: ilp_total(&ideal, trace)?,
        ilp_specialized: ilp_specialized_all(&ideal, trace)?
            .into_iter()
            .map(|(op, v)| (op.name().to_string(), v))
            .collect(),
        dlp1: dlp(&ideal, trace, false)?,
        dlp2: dlp(&ideal, trace, true)?,
        bblp_real: bblp(&real, trace)?,
        bblp_smart: bblp(&smart, trace)?,
        pbblp: potential.average.as_ref().ok().copied(),
        pbblp_undefined: potential.average.as_ref().err().map(|e| e.to_string()),
        per_block_pbblp: potential.per_block,
    })
}
