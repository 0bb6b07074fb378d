//! Workload characterization from dynamic instruction traces.
//!
//! The crate ingests a JSON-Lines trace of executed instructions and
//! computes scores that describe how well a workload suits near-memory
//! processing: memory entropy, multi-granularity reuse distance, spatial
//! locality, data-level parallelism and basic-block-level parallelism.
//!
//! - [`trace`]: event model, ingestion, dependency graphs.
//! - [`memory`]: entropy, reuse signatures, distribution maps, spatial locality.
//! - [`parallelism`]: ideal and block-level schedules, ILP/DLP/BBLP/PBBLP.
//! - [`synth`]: deterministic synthetic workloads.
//! - [`oracle`]: brute-force reference implementations.
//! - [`report`]: the combined metrics report and its JSON/CSV forms.

pub mod memory;
pub mod oracle;
pub mod parallelism;
pub mod report;
pub mod synth;
pub mod trace;

use thiserror::Error;

/// Why a metric has no value for a given trace.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Undefined {
    #[error("trace has no memory accesses")]
    NoMemoryAccesses,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("no basic block is eligible")]
    NoEligibleBlocks,
    #[error("invalid parameter: {0}")]
    Parameter(String),
}
