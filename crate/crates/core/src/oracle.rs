//! Brute-force reference implementations of every metric.
//!
//! Nothing here calls into the metric engine: dependencies, distances,
//! schedules and scores are all recomputed from the raw events with the
//! most direct algorithm available. They are quadratic or worse and only
//! meant for small traces, where they serve as the ground truth the engine
//! is checked against.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::memory::{
    EntropyPoint, EntropyReport, PairScore, ReuseBin, ReuseSignature, SpatialLocalityReport,
};
use crate::parallelism::{ParallelismReport, Regime};
use crate::report::{
    prepare, trace_meta, AnalysisConfig, AnalyzeError, Engine, MetricsReport, SCHEMA_VERSION,
};
use crate::trace::{Opcode, Trace, TraceEvent};
use crate::Undefined;

/// Dependency edges as `(producer, consumer)` positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleDeps {
    pub edges: BTreeSet<(usize, usize)>,
}

/// Value edges from the latest earlier definition of each used id, and
/// optionally memory edges from the latest earlier store writing each byte
/// a load reads.
pub fn oracle_dependencies(trace: &Trace, memory: bool) -> OracleDeps {
    let events = trace.events();
    let mut edges = BTreeSet::new();
    for (c, consumer) in events.iter().enumerate() {
        for &used in &consumer.uses {
            if let Some(p) = (0..c).rev().find(|&p| events[p].def == Some(used)) {
                edges.insert((p, c));
            }
        }
        if !memory || consumer.opcode != Opcode::Load {
            continue;
        }
        let Some(load) = consumer.mem else { continue };
        for byte in load.address as u128..load.address as u128 + load.size as u128 {
            let writer = (0..c).rev().find(|&p| {
                let e = &events[p];
                e.opcode == Opcode::Store
                    && e.mem.is_some_and(|m| {
                        (m.address as u128..m.address as u128 + m.size as u128).contains(&byte)
                    })
            });
            if let Some(p) = writer {
                edges.insert((p, c));
            }
        }
    }
    OracleDeps { edges }
}

fn memory_events(trace: &Trace) -> Vec<&TraceEvent> {
    trace.events().iter().filter(|e| e.mem.is_some()).collect()
}

/// Distinct lines touched between each access and the previous access to
/// its line, found by scanning backwards.
pub fn oracle_reuse_distance(trace: &Trace, line_size: u64) -> Vec<Option<u64>> {
    let lines: Vec<u64> = memory_events(trace)
        .iter()
        .map(|e| e.mem.unwrap().address / line_size)
        .collect();
    (0..lines.len())
        .map(|i| {
            let mut seen = HashSet::new();
            for j in (0..i).rev() {
                if lines[j] == lines[i] {
                    return Some(seen.len() as u64);
                }
                seen.insert(lines[j]);
            }
            None
        })
        .collect()
}

pub fn oracle_entropy(trace: &Trace, k: u32) -> Result<f64, Undefined> {
    if k >= trace.address_bits() {
        return Err(Undefined::Parameter(format!("lsb cut {k} out of range")));
    }
    let accesses = memory_events(trace);
    if accesses.is_empty() {
        return Err(Undefined::NoMemoryAccesses);
    }
    let mut table: BTreeMap<u64, u64> = BTreeMap::new();
    for e in &accesses {
        *table.entry(e.mem.unwrap().address >> k).or_insert(0) += 1;
    }
    let n = accesses.len() as f64;
    let h: f64 = table
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    Ok(h + 0.0)
}

fn oracle_bin(distance: u64) -> usize {
    let mut bin = 0;
    let mut upper: u128 = 1;
    while distance as u128 >= upper {
        bin += 1;
        upper *= 2;
    }
    bin
}

pub fn oracle_signature(trace: &Trace, line_size: u64) -> ReuseSignature {
    let distances = oracle_reuse_distance(trace, line_size);
    let n = distances.len();
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for d in distances.iter().flatten() {
        *counts.entry(oracle_bin(*d)).or_insert(0) += 1;
    }
    let top = counts.keys().next_back().map_or(0, |&b| b + 1);
    let bins = (0..top)
        .map(|i| {
            let lo = if i == 0 { 0 } else { 1u64 << (i - 1) };
            let hi = if i >= 64 { u64::MAX } else { 1u64 << i };
            ReuseBin {
                lo,
                hi,
                probability: counts.get(&i).copied().unwrap_or(0) as f64 / n as f64,
            }
        })
        .collect();
    let cold = distances.iter().filter(|d| d.is_none()).count();
    ReuseSignature {
        line_size,
        accesses: n,
        bins,
        cold_fraction: if n == 0 { 0.0 } else { cold as f64 / n as f64 },
        empty: n == 0,
    }
}

fn oracle_line_sizes(trace: &Trace, max_line: u64) -> Result<Vec<u64>, Undefined> {
    let word = trace.word_size() as u64;
    if !max_line.is_power_of_two() || max_line <= word {
        return Err(Undefined::Parameter(format!(
            "bad max line size {max_line}"
        )));
    }
    let mut sizes = vec![word];
    while sizes[sizes.len() - 1] < max_line {
        sizes.push(sizes[sizes.len() - 1] * 2);
    }
    Ok(sizes)
}

/// Spatial locality from explicit distribution maps: one count per
/// `(bin at b, bin at 2b)` cell, with `usize::MAX` standing for cold.
pub fn oracle_slq(trace: &Trace, max_line: u64) -> Result<SpatialLocalityReport, Undefined> {
    let sizes = oracle_line_sizes(trace, max_line)?;
    if memory_events(trace).is_empty() {
        return Err(Undefined::NoMemoryAccesses);
    }
    let cold = usize::MAX;
    let word = trace.word_size() as u64;
    let mut per_pair = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for (beta, pair) in sizes.windows(2).enumerate() {
        let small = oracle_reuse_distance(trace, pair[0]);
        let large = oracle_reuse_distance(trace, pair[1]);
        let bin = |d: &Option<u64>| d.map_or(cold, oracle_bin);
        let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (s, l) in small.iter().zip(&large) {
            *cells.entry((bin(s), bin(l))).or_insert(0) += 1;
        }
        let total = small.len() as f64;
        let rows: BTreeSet<usize> = cells.keys().map(|&(i, _)| i).collect();
        let mut score = 0.0;
        for i in rows {
            let row_total: u64 = cells.iter().filter(|(k, _)| k.0 == i).map(|(_, c)| c).sum();
            let slq_i: f64 = cells
                .iter()
                .filter(|(&(r, c), _)| r == i && c < i)
                .map(|(_, &c)| c as f64 / row_total as f64)
                .sum();
            score += slq_i * row_total as f64 / total;
        }
        let weight = 0.5f64.powi(beta as i32 + 1);
        debug_assert_eq!(pair[0], word << beta);
        num += score * weight;
        den += weight;
        per_pair.push(PairScore {
            line_size: pair[0],
            doubled: pair[1],
            score,
        });
    }
    Ok(SpatialLocalityReport {
        per_pair,
        total: num / den,
    })
}

/// Positions of every block instance, keyed by first position.
fn instances(trace: &Trace) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, e) in trace.events().iter().enumerate() {
        groups
            .entry((e.bb_static, e.bb_instance))
            .or_default()
            .push(i);
    }
    let mut all: Vec<Vec<usize>> = groups.into_values().collect();
    all.sort();
    all
}

/// Issue cycles by relaxation: start everything at cycle 1 and keep
/// enforcing every honored constraint until nothing moves.
pub fn oracle_schedule(trace: &Trace, deps: &OracleDeps, regime: Regime) -> Vec<u64> {
    let events = trace.events();
    let honored: Vec<(usize, usize)> = deps
        .edges
        .iter()
        .copied()
        .filter(|&(p, _)| !(regime == Regime::BblpSmart && events[p].index_update))
        .collect();
    let mut cycle = vec![1u64; events.len()];
    match regime {
        Regime::IdealIlp => loop {
            let mut changed = false;
            for &(p, c) in &honored {
                if cycle[c] < cycle[p] + 1 {
                    cycle[c] = cycle[p] + 1;
                    changed = true;
                }
            }
            if !changed {
                break cycle;
            }
        },
        Regime::BblpReal | Regime::BblpSmart => {
            let groups = instances(trace);
            let mut owner = vec![0; events.len()];
            for (g, members) in groups.iter().enumerate() {
                for &i in members {
                    owner[i] = g;
                }
            }
            let mut start = vec![1u64; groups.len()];
            loop {
                let mut changed = false;
                for &(p, c) in &honored {
                    let (gp, gc) = (owner[p], owner[c]);
                    if gp == gc {
                        continue;
                    }
                    let finish = start[gp] + groups[gp].len() as u64 - 1;
                    if start[gc] < finish + 1 {
                        start[gc] = finish + 1;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            for (g, members) in groups.iter().enumerate() {
                for (offset, &i) in members.iter().enumerate() {
                    cycle[i] = start[g] + offset as u64;
                }
            }
            cycle
        }
    }
}

/// Specialized ILP of every opcode, with the load/store denominator
/// optionally counting address-consecutive runs per cycle.
fn oracle_specialized(trace: &Trace, cycle: &[u64], runs: bool) -> BTreeMap<String, (u64, u64)> {
    let mut per_op: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in trace.events().iter().enumerate() {
        per_op
            .entry(e.opcode.name().to_string())
            .or_default()
            .push(i);
    }
    per_op
        .into_iter()
        .map(|(name, members)| {
            let cycles: BTreeSet<u64> = members.iter().map(|&i| cycle[i]).collect();
            let slots = if runs && trace.events()[members[0]].mem.is_some() {
                cycles
                    .iter()
                    .map(|&c| {
                        let mut group: Vec<(u128, u128)> = members
                            .iter()
                            .filter(|&&i| cycle[i] == c)
                            .map(|&i| {
                                let m = trace.events()[i].mem.unwrap();
                                (m.address as u128, m.size as u128)
                            })
                            .collect();
                        group.sort();
                        let mut count = 1;
                        for k in 1..group.len() {
                            if group[k].0 != group[k - 1].0 + group[k - 1].1 {
                                count += 1;
                            }
                        }
                        count
                    })
                    .sum()
            } else {
                cycles.len() as u64
            };
            (name, (members.len() as u64, slots))
        })
        .collect()
}

pub fn oracle_ilp_specialized(trace: &Trace, cycle: &[u64]) -> BTreeMap<String, f64> {
    oracle_specialized(trace, cycle, false)
        .into_iter()
        .map(|(name, (n, s))| (name, n as f64 / s as f64))
        .collect()
}

pub fn oracle_dlp(trace: &Trace, cycle: &[u64], consecutiveness: bool) -> Result<f64, Undefined> {
    if trace.is_empty() {
        return Err(Undefined::EmptyTrace);
    }
    let total = trace.len() as f64;
    Ok(oracle_specialized(trace, cycle, consecutiveness)
        .values()
        .map(|&(n, s)| n as f64 / s as f64 * n as f64 / total)
        .sum())
}

fn makespan_ratio(trace: &Trace, cycle: &[u64]) -> Result<f64, Undefined> {
    let max = cycle.iter().copied().max().ok_or(Undefined::EmptyTrace)?;
    Ok(trace.len() as f64 / max as f64)
}

/// Per-block PBBLP from explicit reachability between instances and a
/// longest-path search over the resulting instance DAG.
pub fn oracle_pbblp(trace: &Trace, deps: &OracleDeps) -> BTreeMap<u64, f64> {
    let events = trace.events();
    let n = events.len();
    let mut succ = vec![Vec::new(); n];
    for &(p, c) in &deps.edges {
        if !events[p].index_update {
            succ[p].push(c);
        }
    }
    let mut by_block: BTreeMap<u64, Vec<Vec<usize>>> = BTreeMap::new();
    for group in instances(trace) {
        by_block
            .entry(events[group[0]].bb_static)
            .or_default()
            .push(group);
    }
    let mut result = BTreeMap::new();
    for (block, groups) in by_block {
        let all_bookkeeping = groups.iter().flatten().all(|&i| {
            let e = &events[i];
            e.index_update || matches!(e.opcode, Opcode::Cmp | Opcode::Branch)
        });
        if all_bookkeeping {
            continue;
        }
        // reaches[u][v]: some event of instance v is reachable from instance u
        let k = groups.len();
        let mut reaches = vec![vec![false; k]; k];
        for (u, group) in groups.iter().enumerate() {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = group.clone();
            while let Some(x) = stack.pop() {
                for &y in &succ[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            for (v, other) in groups.iter().enumerate() {
                reaches[u][v] = v != u && other.iter().any(|&i| seen[i]);
            }
        }
        let mut memo = vec![0u64; k];
        fn longest(u: usize, reaches: &[Vec<bool>], memo: &mut [u64]) -> u64 {
            if memo[u] == 0 {
                let mut best = 0;
                for v in 0..reaches.len() {
                    if reaches[u][v] {
                        best = best.max(longest(v, reaches, memo));
                    }
                }
                memo[u] = best + 1;
            }
            memo[u]
        }
        let chain = (0..k)
            .map(|u| longest(u, &reaches, &mut memo))
            .max()
            .unwrap();
        result.insert(block, k as f64 / chain as f64);
    }
    result
}

fn oracle_pbblp_average(trace: &Trace, per_block: &BTreeMap<u64, f64>) -> Result<f64, Undefined> {
    let mut counts: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for e in trace.events() {
        counts.entry(e.bb_static).or_default().insert(e.bb_instance);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (block, score) in per_block {
        let k = counts[block].len() as f64;
        num += score * k;
        den += k;
    }
    if den == 0.0 {
        Err(Undefined::NoEligibleBlocks)
    } else {
        Ok(num / den)
    }
}

pub fn oracle_parallelism(
    trace: &Trace,
    deps: &OracleDeps,
) -> Result<ParallelismReport, Undefined> {
    if trace.is_empty() {
        return Err(Undefined::EmptyTrace);
    }
    let ideal = oracle_schedule(trace, deps, Regime::IdealIlp);
    let real = oracle_schedule(trace, deps, Regime::BblpReal);
    let smart = oracle_schedule(trace, deps, Regime::BblpSmart);
    let per_block = oracle_pbblp(trace, deps);
    let average = oracle_pbblp_average(trace, &per_block);
    Ok(ParallelismReport {
        ilp_total: makespan_ratio(trace, &ideal)?,
        ilp_specialized: oracle_ilp_specialized(trace, &ideal),
        dlp1: oracle_dlp(trace, &ideal, false)?,
        dlp2: oracle_dlp(trace, &ideal, true)?,
        bblp_real: makespan_ratio(trace, &real)?,
        bblp_smart: makespan_ratio(trace, &smart)?,
        pbblp: average.as_ref().ok().copied(),
        pbblp_undefined: average.as_ref().err().map(|e| e.to_string()),
        per_block_pbblp: per_block,
    })
}

/// The full report computed by the oracles alone.
pub fn oracle_report(
    trace: &Trace,
    config: &AnalysisConfig,
) -> Result<MetricsReport, AnalyzeError> {
    let (prepared, resolved) = prepare(trace, config)?;
    let t = &prepared;
    let sizes = oracle_line_sizes(t, resolved.max_line_size)
        .map_err(|e| AnalyzeError::Config(e.to_string()))?;
    let entropy = (0..=resolved.entropy_lsb_max)
        .map(|k| oracle_entropy(t, k).map(|entropy| EntropyPoint { k, entropy }))
        .collect::<Result<Vec<_>, _>>()
        .map(|per_lsb_cut| EntropyReport {
            per_lsb_cut,
            distinct_addresses: memory_events(t)
                .iter()
                .map(|e| e.mem.unwrap().address)
                .collect::<BTreeSet<_>>()
                .len(),
        });
    let deps = oracle_dependencies(t, resolved.memory_deps);
    Ok(MetricsReport {
        schema_version: SCHEMA_VERSION,
        engine: Engine::Oracle,
        config: resolved,
        trace: trace_meta(trace),
        entropy: entropy.into(),
        reuse_signatures: sizes.iter().map(|&b| oracle_signature(t, b)).collect(),
        spatial_locality: oracle_slq(t, resolved.max_line_size).into(),
        parallelism: oracle_parallelism(t, &deps).into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::loads;

    #[test]
    fn backward_scan_distances() {
        let t = loads(&[0, 64, 0]);
        assert_eq!(oracle_reuse_distance(&t, 4), vec![None, None, Some(1)]);
        let t = loads(&[0, 64, 128, 64, 0]);
        assert_eq!(
            oracle_reuse_distance(&t, 4),
            vec![None, None, None, Some(1), Some(2)]
        );
    }

    #[test]
    fn frequency_entropy() {
        let t = loads(&[0, 4, 8, 12]);
        assert_eq!(oracle_entropy(&t, 0), Ok(2.0));
        assert_eq!(oracle_entropy(&t, 4), Ok(0.0));
        assert_eq!(
            oracle_entropy(&Trace::empty(), 0),
            Err(Undefined::NoMemoryAccesses)
        );
    }

    #[test]
    fn bins() {
        let got: Vec<usize> = [0, 1, 2, 3, 4, 7, 8]
            .iter()
            .map(|&d| oracle_bin(d))
            .collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 4]);
        assert_eq!(oracle_bin(u64::MAX), 64);
    }

    #[test]
    fn alternating_lines_signature() {
        let addresses: Vec<u64> = (0..200).map(|i| (i % 2) * 64).collect();
        let sig = oracle_signature(&loads(&addresses), 4);
        assert_eq!(sig.cold_fraction, 2.0 / 200.0);
        assert_eq!(sig.bins[1].probability, 198.0 / 200.0);
    }

    #[test]
    fn word_scan_pairs() {
        let t = loads(&(0..64).map(|i| 4 * i).collect::<Vec<_>>());
        let report = oracle_slq(&t, 32).unwrap();
        let scores: Vec<f64> = report.per_pair.iter().map(|p| p.score).collect();
        assert_eq!(scores, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn relaxation_matches_hand_schedules() {
        let t = loads(&[0; 8]);
        let deps = oracle_dependencies(&t, false);
        assert!(deps.edges.is_empty());
        assert_eq!(oracle_schedule(&t, &deps, Regime::IdealIlp), vec![1; 8]);
        // one block instance runs its events back to back
        assert_eq!(
            oracle_schedule(&t, &deps, Regime::BblpReal),
            (1..=8).collect::<Vec<_>>()
        );
    }
}
