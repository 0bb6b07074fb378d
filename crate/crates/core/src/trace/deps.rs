use std::collections::HashMap;

use super::{Trace, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepKind {
    /// def -> use of an SSA value.
    Value,
    /// store -> load reading at least one byte the store wrote last.
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub producer: usize,
    pub consumer: usize,
    pub kind: DepKind,
}

/// Dynamic data dependencies between trace events.
///
/// Edges are stored grouped by consumer, so the producers of event `i` are
/// a contiguous slice. Every edge points forward in trace order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    index_update_producer: Vec<bool>,
}

impl DependencyGraph {
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Incoming edges of `consumer`.
    pub fn incoming(&self, consumer: usize) -> &[Edge] {
        &self.edges[self.offsets[consumer]..self.offsets[consumer + 1]]
    }

    /// Whether the edge's producer is flagged as a loop-index update.
    pub fn is_index_update_edge(&self, edge: &Edge) -> bool {
        self.index_update_producer[edge.producer]
    }

    pub fn index_update_edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(|e| self.is_index_update_edge(e))
    }

    pub fn event_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Builds value edges (most recent def of each used id) and, optionally,
/// store-to-load memory edges from the last writer of every byte a load reads.
pub fn build_dependency_graph(trace: &Trace, include_memory_deps: bool) -> DependencyGraph {
    let events = trace.events();
    let mut last_def: HashMap<ValueId, usize> = HashMap::new();
    let mut last_store: HashMap<u64, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut offsets = Vec::with_capacity(events.len() + 1);
    let mut producers = Vec::new();

    offsets.push(0);
    for (i, event) in events.iter().enumerate() {
        producers.clear();
        producers.extend(event.uses.iter().filter_map(|v| last_def.get(v).copied()));
        producers.sort_unstable();
        producers.dedup();
        edges.extend(producers.iter().map(|&p| Edge {
            producer: p,
            consumer: i,
            kind: DepKind::Value,
        }));

        if include_memory_deps {
            if let Some(mem) = event.mem {
                let bytes = (0..mem.size as u64).map(|o| mem.address.wrapping_add(o));
                match event.opcode {
                    super::Opcode::Load => {
                        producers.clear();
                        producers.extend(bytes.filter_map(|b| last_store.get(&b).copied()));
                        producers.sort_unstable();
                        producers.dedup();
                        edges.extend(producers.iter().map(|&p| Edge {
                            producer: p,
                            consumer: i,
                            kind: DepKind::Memory,
                        }));
                    }
                    super::Opcode::Store => {
                        for b in bytes {
                            last_store.insert(b, i);
                        }
                    }
                    _ => {}
                }
            }
        }

        if let Some(def) = event.def {
            last_def.insert(def, i);
        }
        offsets.push(edges.len());
    }

    DependencyGraph {
        edges,
        offsets,
        index_update_producer: events.iter().map(|e| e.index_update).collect(),
    }
}
