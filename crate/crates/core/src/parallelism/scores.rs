use std::collections::{BTreeMap, HashMap, HashSet};

use super::schedule::{Regime, ScheduleResult};
use crate::trace::{Opcode, Trace};
use crate::Undefined;

fn require(sched: &ScheduleResult, allowed: &[Regime]) -> Result<(), Undefined> {
    if allowed.contains(&sched.regime) {
        Ok(())
    } else {
        Err(Undefined::Parameter(format!(
            "schedule regime {:?} not accepted here",
            sched.regime
        )))
    }
}

pub fn ilp_total(sched: &ScheduleResult, trace: &Trace) -> Result<f64, Undefined> {
    require(sched, &[Regime::IdealIlp])?;
    if trace.is_empty() {
        return Err(Undefined::EmptyTrace);
    }
    Ok(trace.len() as f64 / sched.max_issue_cycle as f64)
}

/// Per-opcode instruction counts and the number of issue slots they occupy.
///
/// A slot is a cycle in which the opcode issues at all. With
/// `consecutiveness`, a load or store cycle contributes one slot per maximal
/// run of address-adjacent accesses instead of one per cycle.
fn opcode_slots(
    sched: &ScheduleResult,
    trace: &Trace,
    consecutiveness: bool,
) -> BTreeMap<Opcode, (u64, u64)> {
    let mut counts: BTreeMap<Opcode, u64> = BTreeMap::new();
    let mut cycles: HashSet<(&Opcode, u64)> = HashSet::new();
    let mut groups: HashMap<(&Opcode, u64), Vec<(u64, u32)>> = HashMap::new();
    for (event, &cycle) in trace.events().iter().zip(&sched.issue_cycle) {
        *counts.entry(event.opcode.clone()).or_insert(0) += 1;
        match event.mem {
            Some(mem) if consecutiveness => groups
                .entry((&event.opcode, cycle))
                .or_default()
                .push((mem.address, mem.size)),
            _ => {
                cycles.insert((&event.opcode, cycle));
            }
        }
    }
    let mut slots: HashMap<&Opcode, u64> = HashMap::new();
    for (opcode, _) in cycles {
        *slots.entry(opcode).or_insert(0) += 1;
    }
    for ((opcode, _), mut accesses) in groups {
        *slots.entry(opcode).or_insert(0) += consecutive_runs(&mut accesses);
    }
    counts
        .into_iter()
        .map(|(opcode, n)| {
            let s = slots[&opcode];
            (opcode, (n, s))
        })
        .collect()
}

/// Maximal runs where each access starts right where the previous one ends.
fn consecutive_runs(accesses: &mut [(u64, u32)]) -> u64 {
    accesses.sort_unstable();
    1 + accesses
        .windows(2)
        .filter(|w| w[0].0.checked_add(w[0].1 as u64) != Some(w[1].0))
        .count() as u64
}

/// Average number of `opcode` instructions issued per cycle in which that
/// opcode issues, projected from the ideal schedule.
pub fn ilp_specialized(
    sched: &ScheduleResult,
    trace: &Trace,
    opcode: &Opcode,
) -> Result<f64, Undefined> {
    ilp_specialized_all(sched, trace)?
        .remove(opcode)
        .ok_or_else(|| Undefined::Parameter(format!("opcode `{opcode}` does not occur")))
}

pub fn ilp_specialized_all(
    sched: &ScheduleResult,
    trace: &Trace,
) -> Result<BTreeMap<Opcode, f64>, Undefined> {
    require(sched, &[Regime::IdealIlp])?;
    Ok(opcode_slots(sched, trace, false)
        .into_iter()
        .map(|(op, (n, slots))| (op, n as f64 / slots as f64))
        .collect())
}

/// Opcode-frequency-weighted specialized ILP. With `consecutiveness`, loads
/// and stores only count as parallel when their addresses are adjacent.
pub fn dlp(sched: &ScheduleResult, trace: &Trace, consecutiveness: bool) -> Result<f64, Undefined> {
    require(sched, &[Regime::IdealIlp])?;
    if trace.is_empty() {
        return Err(Undefined::EmptyTrace);
    }
    let total = trace.len() as f64;
    Ok(opcode_slots(sched, trace, consecutiveness)
        .values()
        .map(|&(n, slots)| (n as f64 / slots as f64) * (n as f64 / total))
        .sum())
}

pub fn bblp(sched: &ScheduleResult, trace: &Trace) -> Result<f64, Undefined> {
    require(sched, &[Regime::BblpReal, Regime::BblpSmart])?;
    if trace.is_empty() {
        return Err(Undefined::EmptyTrace);
    }
    Ok(trace.len() as f64 / sched.max_issue_cycle as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallelism::schedule::schedule_ideal;
    use crate::testutil::loads;
    use crate::trace::{build_dependency_graph, TraceEvent};

    fn ideal(trace: &Trace) -> ScheduleResult {
        schedule_ideal(trace, &build_dependency_graph(trace, false))
    }

    fn adds(uses: &[&[u64]]) -> Trace {
        let events = uses
            .iter()
            .enumerate()
            .map(|(i, u)| TraceEvent {
                seq: i as u64,
                static_id: 0,
                opcode: Opcode::Add,
                def: Some(i as u64),
                uses: u.to_vec(),
                mem: None,
                bb_static: 0,
                bb_instance: 0,
                index_update: false,
            })
            .collect();
        Trace::new(events, 4, 64).unwrap()
    }

    #[test]
    fn ilp_total_examples() {
        let independent = adds(&[&[], &[], &[], &[]]);
        assert_eq!(ilp_total(&ideal(&independent), &independent).unwrap(), 4.0);
        let chain = adds(&[&[], &[0], &[1], &[2]]);
        assert_eq!(ilp_total(&ideal(&chain), &chain).unwrap(), 1.0);
        let diamond = adds(&[&[], &[0], &[0], &[1, 2]]);
        assert_eq!(ilp_total(&ideal(&diamond), &diamond).unwrap(), 4.0 / 3.0);
        assert_eq!(
            ilp_total(&ideal(&Trace::empty()), &Trace::empty()),
            Err(Undefined::EmptyTrace)
        );
    }

    #[test]
    fn specialized_counts_distinct_cycles() {
        let parallel = loads(&[0; 8]);
        assert_eq!(
            ilp_specialized(&ideal(&parallel), &parallel, &Opcode::Load).unwrap(),
            8.0
        );

        // six adds occupying cycles {1,1,1,2,2,5}
        let projected = ScheduleResult {
            regime: Regime::IdealIlp,
            issue_cycle: vec![1, 1, 1, 2, 2, 5],
            max_issue_cycle: 5,
        };
        let six = adds(&[&[], &[], &[], &[], &[], &[]]);
        assert_eq!(
            ilp_specialized(&projected, &six, &Opcode::Add).unwrap(),
            2.0
        );
        assert!(ilp_specialized(&projected, &six, &Opcode::Mul).is_err());
    }

    #[test]
    fn consecutive_loads_form_one_run() {
        let adjacent = loads(&(0..8).map(|i| 4 * i).collect::<Vec<_>>());
        let s = ideal(&adjacent);
        assert_eq!(dlp(&s, &adjacent, false).unwrap(), 8.0);
        assert_eq!(dlp(&s, &adjacent, true).unwrap(), 8.0);

        let scattered = loads(&(0..8).map(|i| 100 * i).collect::<Vec<_>>());
        let s = ideal(&scattered);
        assert_eq!(dlp(&s, &scattered, false).unwrap(), 8.0);
        assert_eq!(dlp(&s, &scattered, true).unwrap(), 1.0);
    }

    #[test]
    fn run_counting() {
        assert_eq!(consecutive_runs(&mut [(8, 4), (0, 4), (4, 4)]), 1);
        assert_eq!(consecutive_runs(&mut [(0, 4), (0, 4)]), 2);
        assert_eq!(consecutive_runs(&mut [(0, 8), (8, 4), (16, 4)]), 2);
        assert_eq!(consecutive_runs(&mut [(u64::MAX - 3, 4), (0, 4)]), 2);
    }

    #[test]
    fn regimes_are_checked() {
        let trace = adds(&[&[]]);
        let s = ideal(&trace);
        assert!(bblp(&s, &trace).is_err());
    }
}
