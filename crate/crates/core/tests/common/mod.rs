//! Seeded trace factories shared by the integration tests.

#![allow(dead_code)]

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use wlchar::synth::{generate, GeneratorKind, GeneratorSpec};
use wlchar::trace::{MemAccess, Opcode, Trace, TraceEvent};

pub struct Dice(Xoshiro256PlusPlus);

impl Dice {
    pub fn new(seed: u64) -> Self {
        Dice(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }
}

const OPCODES: [Opcode; 9] = [
    Opcode::Load,
    Opcode::Store,
    Opcode::Add,
    Opcode::Sub,
    Opcode::Mul,
    Opcode::Cmp,
    Opcode::Branch,
    Opcode::Phi,
    Opcode::Call,
];

/// A valid trace of up to `max_events` events: a handful of static blocks
/// visited in random order, random opcodes, values that may be redefined,
/// and loads/stores over a small overlapping address pool so reuse and
/// store-to-load forwarding both occur.
pub fn random_trace(seed: u64, max_events: u64) -> Trace {
    let mut dice = Dice::new(seed);
    let target = 1 + dice.below(max_events);
    let blocks = 1 + dice.below(5);
    // address pool: a dense region, optionally with far-away outliers
    let region = 4 << dice.below(10);
    let scatter = dice.chance(30);
    let mut instances = vec![0u64; blocks as usize];
    let mut lengths: Vec<u64> = (0..blocks).map(|_| 1 + dice.below(6)).collect();
    let mut defined: Vec<u64> = Vec::new();
    let mut next_value = 0u64;
    let mut events = Vec::new();
    while (events.len() as u64) < target {
        let bb = dice.below(blocks);
        if dice.chance(10) {
            lengths[bb as usize] = 1 + dice.below(6);
        }
        let bbi = instances[bb as usize];
        instances[bb as usize] += 1;
        for slot in 0..lengths[bb as usize] {
            let opcode = OPCODES[dice.below(OPCODES.len() as u64) as usize].clone();
            let uses: Vec<u64> = (0..dice.below(3))
                .filter(|_| !defined.is_empty())
                .map(|_| {
                    // favour recent values to build chains
                    let back = dice.below(defined.len().min(8) as u64) as usize;
                    defined[defined.len() - 1 - back]
                })
                .collect();
            let def = if opcode == Opcode::Store || opcode == Opcode::Branch || dice.chance(10) {
                None
            } else if !defined.is_empty() && dice.chance(10) {
                Some(defined[dice.below(defined.len() as u64) as usize])
            } else {
                next_value += 1;
                Some(next_value - 1)
            };
            if let Some(d) = def {
                defined.push(d);
            }
            let mem = opcode.is_memory().then(|| {
                let size = 1u32 << dice.below(4);
                let address = if scatter && dice.chance(20) {
                    dice.below(1 << 40)
                } else {
                    dice.below(region)
                };
                MemAccess::new(address, size)
            });
            let index_update = matches!(opcode, Opcode::Add | Opcode::Sub) && dice.chance(30);
            events.push(TraceEvent {
                seq: events.len() as u64,
                static_id: bb * 16 + slot,
                opcode,
                def,
                uses,
                mem,
                bb_static: bb,
                bb_instance: bbi,
                index_update,
            });
        }
    }
    Trace::new(events, 4, 64).expect("random traces are valid")
}

/// A generator trace with small random parameters.
pub fn synthetic_trace(seed: u64) -> Trace {
    let mut dice = Dice::new(seed ^ 0x5eed);
    let kind = GeneratorKind::ALL[dice.below(6) as usize];
    let n = match kind {
        GeneratorKind::StridedMatmul => 1 + dice.below(8),
        _ => 1 + dice.below(200),
    };
    let spec = GeneratorSpec::new(kind, n)
        .seed(seed)
        .stride(1 + dice.below(4))
        .lanes(1 + dice.below(8))
        .body(6 + dice.below(4))
        .space(1 << (10 + dice.below(12)));
    generate(&spec).expect("small generator parameters are valid")
}

/// Alternates hand-rolled random traces and generator output.
pub fn mixed_trace(seed: u64, max_events: u64) -> Trace {
    if seed % 3 == 2 {
        synthetic_trace(seed)
    } else {
        random_trace(seed, max_events)
    }
}

/// Uniformly random word addresses over `space` bytes.
pub fn random_addresses(seed: u64, count: usize, space: u64) -> Vec<u64> {
    let mut dice = Dice::new(seed);
    (0..count).map(|_| dice.below(space / 4) * 4).collect()
}

/// Independent 4-byte loads in one block instance.
pub fn loads(addresses: &[u64]) -> Trace {
    let events = addresses
        .iter()
        .enumerate()
        .map(|(i, &a)| TraceEvent {
            seq: i as u64,
            static_id: 0,
            opcode: Opcode::Load,
            def: None,
            uses: vec![],
            mem: Some(MemAccess::new(a, 4)),
            bb_static: 0,
            bb_instance: 0,
            index_update: false,
        })
        .collect();
    Trace::new(events, 4, 64).unwrap()
}

pub fn close(a: f64, b: f64, tolerance: f64) -> bool {
    (a - b).abs() <= tolerance
}

/// Every engine result on `trace` against its brute-force counterpart.
/// Integral results must match exactly, reals to 1e-9.
pub fn engine_matches_oracle(trace: &Trace, memory_deps: bool) -> Result<(), String> {
    use wlchar::memory::{memory_entropy, reuse_distance_stream, spatial_locality};
    use wlchar::oracle::*;
    use wlchar::parallelism::*;
    use wlchar::trace::build_dependency_graph;

    let deps = build_dependency_graph(trace, memory_deps);
    let odeps = oracle_dependencies(trace, memory_deps);
    let edges: std::collections::BTreeSet<(usize, usize)> = deps
        .edges()
        .iter()
        .map(|e| (e.producer, e.consumer))
        .collect();
    if edges != odeps.edges {
        return Err("dependency edges differ".into());
    }
    for b in [4, 8, 16, 32, 64, 128, 256] {
        if reuse_distance_stream(trace, b).unwrap() != oracle_reuse_distance(trace, b) {
            return Err(format!("reuse distances differ at line size {b}"));
        }
    }
    for k in [0, 1, 2, 5, 16] {
        match (memory_entropy(trace, k), oracle_entropy(trace, k)) {
            (Ok(a), Ok(b)) if close(a, b, 1e-9) => {}
            (Err(a), Err(b)) if a == b => {}
            other => return Err(format!("entropy at k={k}: {other:?}")),
        }
    }
    match (spatial_locality(trace, 256), oracle_slq(trace, 256)) {
        (Ok(a), Ok(b)) => {
            let pairs_agree = a.per_pair.len() == b.per_pair.len()
                && a.per_pair
                    .iter()
                    .zip(&b.per_pair)
                    .all(|(x, y)| x.line_size == y.line_size && close(x.score, y.score, 1e-9));
            if !pairs_agree || !close(a.total, b.total, 1e-9) {
                return Err(format!("slq {} vs oracle {}", a.total, b.total));
            }
        }
        (Err(a), Err(b)) if a == b => {}
        other => return Err(format!("slq: {other:?}")),
    }
    let ideal = schedule_ideal(trace, &deps);
    for (regime, engine) in [
        (Regime::IdealIlp, ideal.clone()),
        (Regime::BblpReal, schedule_bblp(trace, &deps, false)),
        (Regime::BblpSmart, schedule_bblp(trace, &deps, true)),
    ] {
        if engine.issue_cycle != oracle_schedule(trace, &odeps, regime) {
            return Err(format!("{regime:?} schedule differs"));
        }
    }
    if pbblp(trace, &deps).per_block != oracle_pbblp(trace, &odeps) {
        return Err("pbblp differs".into());
    }
    if !trace.is_empty() {
        for consecutive in [false, true] {
            let a = dlp(&ideal, trace, consecutive).unwrap();
            let b = oracle_dlp(trace, &ideal.issue_cycle, consecutive).unwrap();
            if !close(a, b, 1e-9) {
                return Err(format!("dlp({consecutive}) {a} vs oracle {b}"));
            }
        }
        let specialized: std::collections::BTreeMap<String, f64> =
            ilp_specialized_all(&ideal, trace)
                .unwrap()
                .into_iter()
                .map(|(op, v)| (op.name().to_string(), v))
                .collect();
        if specialized != oracle_ilp_specialized(trace, &ideal.issue_cycle) {
            return Err("specialized ilp differs".into());
        }
    }
    Ok(())
}
