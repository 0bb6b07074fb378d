use super::{build_dependency_graph, Opcode, Trace};

/// Flags loop-index updates for traces whose producer did not set them.
///
/// An `add`/`sub` is flagged when it has at least one consumer and every
/// consumer of its result is a `cmp`, a `branch`, or a later instance of the
/// same static instruction. Existing flags are kept.
pub fn tag_index_updates(trace: &Trace) -> Trace {
    let deps = build_dependency_graph(trace, false);
    let events = trace.events();
    let mut consumers = vec![0usize; events.len()];
    let mut escapes = vec![false; events.len()];
    for edge in deps.edges() {
        let producer = &events[edge.producer];
        let consumer = &events[edge.consumer];
        consumers[edge.producer] += 1;
        if !(consumer.opcode.is_control() || consumer.static_id == producer.static_id) {
            escapes[edge.producer] = true;
        }
    }

    let mut tagged = events.to_vec();
    for (i, event) in tagged.iter_mut().enumerate() {
        let candidate = matches!(event.opcode, Opcode::Add | Opcode::Sub) && event.def.is_some();
        if candidate && consumers[i] > 0 && !escapes[i] {
            event.index_update = true;
        }
    }
    Trace::from_parts_unchecked(tagged, trace.word_size(), trace.address_bits())
}
