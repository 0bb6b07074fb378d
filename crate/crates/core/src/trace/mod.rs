//! Dynamic instruction traces.
//!
//! A [`Trace`] is an ordered list of [`TraceEvent`]s, one per executed
//! instruction, together with the word size and address width of the
//! machine that produced it. Every metric in this crate is a pure function
//! of an immutable, validated `Trace`.

mod deps;
mod index;
mod ingest;

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use deps::{build_dependency_graph, DepKind, DependencyGraph, Edge};
pub use index::tag_index_updates;
pub use ingest::{ingest, ingest_path, serialize, write_trace, IngestError, IngestOptions};

/// Identifier of an SSA-style value produced by one event and consumed by later ones.
pub type ValueId = u64;

/// Access sizes (in bytes) a memory event may carry.
pub const ACCESS_SIZES: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];

pub const DEFAULT_WORD_SIZE: u32 = 4;
pub const DEFAULT_ADDRESS_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Load,
    Store,
    Add,
    Sub,
    Mul,
    Div,
    Cmp,
    Branch,
    Phi,
    Call,
    Other(String),
}

impl Opcode {
    pub fn parse(name: &str) -> Opcode {
        match name {
            "load" => Opcode::Load,
            "store" => Opcode::Store,
            "add" => Opcode::Add,
            "sub" => Opcode::Sub,
            "mul" => Opcode::Mul,
            "div" => Opcode::Div,
            "cmp" => Opcode::Cmp,
            "branch" => Opcode::Branch,
            "phi" => Opcode::Phi,
            "call" => Opcode::Call,
            other => Opcode::Other(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Opcode::Load => "load",
            Opcode::Store => "store",
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Div => "div",
            Opcode::Cmp => "cmp",
            Opcode::Branch => "branch",
            Opcode::Phi => "phi",
            Opcode::Call => "call",
            Opcode::Other(name) => name,
        }
    }

    /// Only loads and stores may carry a memory access.
    pub fn is_memory(&self) -> bool {
        matches!(self, Opcode::Load | Opcode::Store)
    }

    pub fn is_control(&self) -> bool {
        matches!(self, Opcode::Cmp | Opcode::Branch)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemAccess {
    pub address: u64,
    /// Bytes touched, starting at `address`.
    pub size: u32,
}

impl MemAccess {
    pub fn new(address: u64, size: u32) -> Self {
        MemAccess { address, size }
    }

    /// One past the last byte touched.
    pub fn end(&self) -> u128 {
        self.address as u128 + self.size as u128
    }

    pub fn overlaps(&self, other: &MemAccess) -> bool {
        (self.address as u128) < other.end() && (other.address as u128) < self.end()
    }
}

/// One dynamically executed instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub static_id: u64,
    pub opcode: Opcode,
    pub def: Option<ValueId>,
    pub uses: Vec<ValueId>,
    pub mem: Option<MemAccess>,
    pub bb_static: u64,
    pub bb_instance: u64,
    /// Marks instructions that only advance a loop induction value.
    pub index_update: bool,
}

impl TraceEvent {
    /// Identity of the dynamic basic-block instance this event belongs to.
    pub fn block_key(&self) -> (u64, u64) {
        (self.bb_static, self.bb_instance)
    }
}

/// Violations of the trace invariants. `seq` is the position of the offending event.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("word size {0} is not a power of two")]
    WordSize(u32),
    #[error("address width {0} is outside 1..=64 bits")]
    AddressBits(u32),
    #[error("event {position}: seq {found} breaks the dense 0-based order")]
    NonMonotoneSeq { position: usize, found: u64 },
    #[error("event {seq}: mem on non-memory opcode `{opcode}`")]
    MemOnNonMemory { seq: u64, opcode: String },
    #[error("event {seq}: `{opcode}` is missing its memory access")]
    MissingMem { seq: u64, opcode: String },
    #[error("event {seq}: access size {size} not in {{1,2,4,8,16,32,64}}")]
    AccessSize { seq: u64, size: u32 },
    #[error("event {seq}: address {address:#x} does not fit in {bits} bits")]
    AddressRange { seq: u64, address: u64, bits: u32 },
    #[error("event {seq}: dangling use of value {value}")]
    DanglingUse { seq: u64, value: ValueId },
    #[error("event {seq}: block {bb} instance {bbi} resumes after another block ran")]
    InterleavedBlock { seq: u64, bb: u64, bbi: u64 },
}

/// A validated dynamic trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    events: Vec<TraceEvent>,
    word_size: u32,
    address_bits: u32,
}

impl Trace {
    /// Validates `events` and wraps them into a trace.
    pub fn new(
        events: Vec<TraceEvent>,
        word_size: u32,
        address_bits: u32,
    ) -> Result<Trace, ValidationError> {
        let mut validator = Validator::new(word_size, address_bits)?;
        for (position, event) in events.iter().enumerate() {
            validator.check(position, event)?;
        }
        Ok(Trace {
            events,
            word_size,
            address_bits,
        })
    }

    pub fn empty() -> Trace {
        Trace {
            events: Vec::new(),
            word_size: DEFAULT_WORD_SIZE,
            address_bits: DEFAULT_ADDRESS_BITS,
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn word_size(&self) -> u32 {
        self.word_size
    }

    pub fn address_bits(&self) -> u32 {
        self.address_bits
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    /// Memory accesses of all loads and stores, in trace order.
    pub fn memory_accesses(&self) -> impl Iterator<Item = MemAccess> + '_ {
        self.events.iter().filter_map(|e| e.mem)
    }

    pub fn memory_access_count(&self) -> usize {
        self.memory_accesses().count()
    }

    pub fn distinct_addresses(&self) -> usize {
        self.memory_accesses()
            .map(|m| m.address)
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn static_block_count(&self) -> usize {
        self.events
            .iter()
            .map(|e| e.bb_static)
            .collect::<HashSet<_>>()
            .len()
    }

    /// Same events, different word size. The word size only affects analysis
    /// granularity, so no event needs re-validation.
    pub fn with_word_size(&self, word_size: u32) -> Result<Trace, ValidationError> {
        if !word_size.is_power_of_two() {
            return Err(ValidationError::WordSize(word_size));
        }
        Ok(Trace {
            events: self.events.clone(),
            word_size,
            address_bits: self.address_bits,
        })
    }

    /// Contiguous runs of events sharing one block instance, as index ranges.
    pub fn block_instances(&self) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.events.len() {
            if i == self.events.len()
                || self.events[i].block_key() != self.events[start].block_key()
            {
                if i > start {
                    runs.push(start..i);
                }
                start = i;
            }
        }
        runs
    }

    pub(crate) fn from_parts_unchecked(
        events: Vec<TraceEvent>,
        word_size: u32,
        address_bits: u32,
    ) -> Trace {
        Trace {
            events,
            word_size,
            address_bits,
        }
    }
}

/// Incremental checker shared by [`Trace::new`] and streaming ingestion.
pub(crate) struct Validator {
    address_bits: u32,
    defined: HashSet<ValueId>,
    finished_blocks: HashSet<(u64, u64)>,
    current_block: Option<(u64, u64)>,
}

impl Validator {
    pub(crate) fn new(word_size: u32, address_bits: u32) -> Result<Self, ValidationError> {
        if !word_size.is_power_of_two() {
            return Err(ValidationError::WordSize(word_size));
        }
        if !(1..=64).contains(&address_bits) {
            return Err(ValidationError::AddressBits(address_bits));
        }
        Ok(Validator {
            address_bits,
            defined: HashSet::new(),
            finished_blocks: HashSet::new(),
            current_block: None,
        })
    }

    pub(crate) fn check(
        &mut self,
        position: usize,
        event: &TraceEvent,
    ) -> Result<(), ValidationError> {
        let seq = event.seq;
        if seq != position as u64 {
            return Err(ValidationError::NonMonotoneSeq {
                position,
                found: seq,
            });
        }
        match (event.opcode.is_memory(), event.mem) {
            (false, Some(_)) => {
                return Err(ValidationError::MemOnNonMemory {
                    seq,
                    opcode: event.opcode.name().to_string(),
                })
            }
            (true, None) => {
                return Err(ValidationError::MissingMem {
                    seq,
                    opcode: event.opcode.name().to_string(),
                })
            }
            (true, Some(mem)) => {
                if !ACCESS_SIZES.contains(&mem.size) {
                    return Err(ValidationError::AccessSize {
                        seq,
                        size: mem.size,
                    });
                }
                if self.address_bits < 64 && mem.address >> self.address_bits != 0 {
                    return Err(ValidationError::AddressRange {
                        seq,
                        address: mem.address,
                        bits: self.address_bits,
                    });
                }
            }
            (false, None) => {}
        }
        for value in &event.uses {
            if !self.defined.contains(value) {
                return Err(ValidationError::DanglingUse { seq, value: *value });
            }
        }
        if let Some(def) = event.def {
            self.defined.insert(def);
        }
        let key = event.block_key();
        if self.current_block != Some(key) {
            if self.finished_blocks.contains(&key) {
                return Err(ValidationError::InterleavedBlock {
                    seq,
                    bb: key.0,
                    bbi: key.1,
                });
            }
            if let Some(previous) = self.current_block.replace(key) {
                self.finished_blocks.insert(previous);
            }
        }
        Ok(())
    }
}

/// Per-static-block instance counts, keyed by block id.
pub fn instance_counts(trace: &Trace) -> HashMap<u64, usize> {
    let mut counts = HashMap::new();
    for run in trace.block_instances() {
        *counts
            .entry(trace.events()[run.start].bb_static)
            .or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(seq: u64, opcode: Opcode) -> TraceEvent {
        TraceEvent {
            seq,
            static_id: seq,
            opcode,
            def: None,
            uses: vec![],
            mem: None,
            bb_static: 0,
            bb_instance: 0,
            index_update: false,
        }
    }

    #[test]
    fn rejects_mem_on_add() {
        let mut e = event(0, Opcode::Add);
        e.mem = Some(MemAccess::new(0x10, 4));
        let err = Trace::new(vec![e], 4, 64).unwrap_err();
        assert!(err.to_string().contains("mem on non-memory opcode"));
    }

    #[test]
    fn rejects_dangling_use_and_gaps() {
        let mut e = event(0, Opcode::Add);
        e.uses = vec![7];
        assert_eq!(
            Trace::new(vec![e], 4, 64).unwrap_err(),
            ValidationError::DanglingUse { seq: 0, value: 7 }
        );
        let err = Trace::new(vec![event(0, Opcode::Add), event(2, Opcode::Add)], 4, 64);
        assert!(matches!(
            err,
            Err(ValidationError::NonMonotoneSeq {
                position: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn rejects_interleaved_instances() {
        let mut events: Vec<_> = (0..3).map(|i| event(i, Opcode::Add)).collect();
        events[1].bb_static = 1;
        assert!(matches!(
            Trace::new(events, 4, 64),
            Err(ValidationError::InterleavedBlock {
                seq: 2,
                bb: 0,
                bbi: 0
            })
        ));
    }

    #[test]
    fn checks_access_size_and_range() {
        let mut e = event(0, Opcode::Load);
        e.mem = Some(MemAccess::new(0, 3));
        assert!(matches!(
            Trace::new(vec![e.clone()], 4, 64),
            Err(ValidationError::AccessSize { .. })
        ));
        e.mem = Some(MemAccess::new(1 << 20, 4));
        assert!(matches!(
            Trace::new(vec![e.clone()], 4, 16),
            Err(ValidationError::AddressRange { .. })
        ));
        assert!(Trace::new(vec![e], 4, 32).is_ok());
        assert_eq!(Trace::new(vec![], 6, 64), Err(ValidationError::WordSize(6)));
    }

    #[test]
    fn block_instances_are_runs() {
        let mut events: Vec<_> = (0..5).map(|i| event(i, Opcode::Add)).collect();
        events[2].bb_instance = 1;
        events[3].bb_instance = 1;
        events[4].bb_static = 3;
        let trace = Trace::new(events, 4, 64).unwrap();
        assert_eq!(trace.block_instances(), vec![0..2, 2..4, 4..5]);
        assert_eq!(instance_counts(&trace)[&0], 2);
    }

    #[test]
    fn opcode_names_round_trip() {
        for name in [
            "load", "store", "add", "sub", "mul", "div", "cmp", "branch", "phi", "call", "fadd",
        ] {
            assert_eq!(Opcode::parse(name).name(), name);
        }
    }
}
