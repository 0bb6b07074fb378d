//! Potential basic-block-level parallelism.
//!
//! For each static block, its dynamic instances form a DAG: instance `u`
//! precedes `v` when a dependency path (ignoring loop-index updates) leads
//! from an event of `u` to an event of `v`, possibly through other blocks.
//! The block's score is its instance count divided by the longest chain of
//! that DAG, so independent instances score the instance count and a fully
//! dependent sequence scores 1.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use crate::trace::{DependencyGraph, Trace, TraceEvent};
use crate::Undefined;

#[derive(Debug, Clone, PartialEq)]
pub struct PbblpResult {
    /// Score of every eligible static block.
    pub per_block: BTreeMap<u64, f64>,
    /// Instance-weighted mean over eligible blocks.
    pub average: Result<f64, Undefined>,
}

/// Blocks made only of index updates, compares and branches are loop
/// bookkeeping and get no score.
fn is_bookkeeping(event: &TraceEvent) -> bool {
    event.index_update || event.opcode.is_control()
}

pub fn pbblp(trace: &Trace, deps: &DependencyGraph) -> PbblpResult {
    let mut blocks: BTreeMap<u64, Vec<Range<usize>>> = BTreeMap::new();
    for run in trace.block_instances() {
        blocks
            .entry(trace.events()[run.start].bb_static)
            .or_default()
            .push(run);
    }

    let mut per_block = BTreeMap::new();
    let mut weighted = 0.0;
    let mut instances = 0usize;
    // reach[e]: longest chain of the current block's instances that reaches event e.
    let mut reach = vec![0u32; trace.len()];
    for (&block, runs) in &blocks {
        let eligible = runs
            .iter()
            .flat_map(|r| &trace.events()[r.clone()])
            .any(|e| !is_bookkeeping(e));
        if !eligible {
            continue;
        }
        let chain = longest_chain(trace, deps, runs, &mut reach);
        let score = runs.len() as f64 / chain as f64;
        per_block.insert(block, score);
        weighted += score * runs.len() as f64;
        instances += runs.len();
    }
    let average = if instances == 0 {
        Err(Undefined::NoEligibleBlocks)
    } else {
        Ok(weighted / instances as f64)
    };
    PbblpResult { per_block, average }
}

/// Forward pass from the block's first instance. An instance's chain length
/// is one more than the longest chain reaching any of its events from
/// outside; that value then flows along dependencies to later events.
fn longest_chain(
    trace: &Trace,
    deps: &DependencyGraph,
    runs: &[Range<usize>],
    reach: &mut [u32],
) -> u32 {
    let first = runs[0].start;
    reach[first..].fill(0);
    let starts: HashMap<usize, &Range<usize>> = runs.iter().map(|r| (r.start, r)).collect();
    let inflow = |reach: &[u32], i: usize, from_before: usize| {
        deps.incoming(i)
            .iter()
            .filter(|e| e.producer >= first && e.producer < from_before)
            .filter(|e| !deps.is_index_update_edge(e))
            .map(|e| reach[e.producer])
            .max()
            .unwrap_or(0)
    };

    let mut longest = 0;
    let mut i = first;
    while i < trace.len() {
        if let Some(&run) = starts.get(&i) {
            let run = run.clone();
            let chain = 1 + run
                .clone()
                .map(|j| inflow(reach, j, run.start))
                .max()
                .unwrap_or(0);
            reach[run.clone()].fill(chain);
            longest = longest.max(chain);
            i = run.end;
        } else {
            reach[i] = inflow(reach, i, i);
            i += 1;
        }
    }
    longest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{build_dependency_graph, Opcode};

    struct Builder {
        events: Vec<TraceEvent>,
    }

    impl Builder {
        fn push(&mut self, opcode: Opcode, def: u64, uses: &[u64], bb: u64, bbi: u64, idx: bool) {
            let seq = self.events.len() as u64;
            self.events.push(TraceEvent {
                seq,
                static_id: bb * 10,
                opcode,
                def: Some(def),
                uses: uses.to_vec(),
                mem: None,
                bb_static: bb,
                bb_instance: bbi,
                index_update: idx,
            });
        }

        fn run(self) -> PbblpResult {
            let trace = Trace::new(self.events, 4, 64).unwrap();
            pbblp(&trace, &build_dependency_graph(&trace, false))
        }
    }

    #[test]
    fn index_only_dependency_scores_instance_count() {
        let mut b = Builder { events: vec![] };
        b.push(Opcode::Add, 0, &[], 1, 0, true);
        b.push(Opcode::Mul, 1, &[0], 1, 0, false);
        b.push(Opcode::Add, 2, &[0], 1, 1, true);
        b.push(Opcode::Mul, 3, &[2], 1, 1, false);
        let result = b.run();
        assert_eq!(result.per_block[&1], 2.0);
        assert_eq!(result.average, Ok(2.0));
    }

    #[test]
    fn true_chain_scores_one() {
        let mut b = Builder { events: vec![] };
        b.push(Opcode::Mul, 0, &[], 1, 0, false);
        for k in 1..5 {
            b.push(Opcode::Mul, k, &[k - 1], 1, k, false);
        }
        assert_eq!(b.run().per_block[&1], 1.0);
    }

    #[test]
    fn chains_through_other_blocks_count() {
        // instance 0 of block 1 -> block 2 -> instance 1 of block 1
        let mut b = Builder { events: vec![] };
        b.push(Opcode::Mul, 0, &[], 1, 0, false);
        b.push(Opcode::Mul, 1, &[0], 2, 0, false);
        b.push(Opcode::Mul, 2, &[1], 1, 1, false);
        let result = b.run();
        assert_eq!(result.per_block[&1], 1.0);
        assert_eq!(result.per_block[&2], 1.0);
        assert_eq!(result.average, Ok(1.0));
    }

    #[test]
    fn pairs_of_dependent_instances() {
        // 8 instances, instance 2k+1 depends on 2k
        let mut b = Builder { events: vec![] };
        for k in 0..8 {
            let uses: Vec<u64> = if k % 2 == 1 { vec![k - 1] } else { vec![] };
            b.push(Opcode::Mul, k, &uses, 1, k, false);
        }
        assert_eq!(b.run().per_block[&1], 4.0);
    }

    #[test]
    fn bookkeeping_blocks_are_excluded() {
        let mut b = Builder { events: vec![] };
        b.push(Opcode::Add, 0, &[], 1, 0, true);
        b.push(Opcode::Cmp, 1, &[0], 1, 0, false);
        let result = b.run();
        assert!(result.per_block.is_empty());
        assert_eq!(result.average, Err(Undefined::NoEligibleBlocks));
    }

    #[test]
    fn weighted_by_instances() {
        let mut b = Builder { events: vec![] };
        // block 1: 3 independent instances -> 3; block 2: single instance -> 1
        for k in 0..3 {
            b.push(Opcode::Mul, k, &[], 1, k, false);
        }
        b.push(Opcode::Mul, 3, &[], 2, 0, false);
        let result = b.run();
        assert_eq!(result.average, Ok((3.0 * 3.0 + 1.0) / 4.0));
    }
}
