//! Reuse (LRU stack) distance at cache-line granularity.
//!
//! The distance of an access is the number of distinct lines touched since
//! the previous access to the same line; first touches are cold (`None`).
//! Distances are computed in O(n log n) with a Fenwick tree over access
//! times: a time is marked while it is the most recent access of its line,
//! so the distance is the count of marked times strictly between the
//! previous and the current access.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::trace::Trace;
use crate::Undefined;

/// `None` is a cold (first-touch) access.
pub type Distance = Option<u64>;

/// Logarithmic bin of a finite distance: 0 -> 0, [1,2) -> 1, [2,4) -> 2, ...
pub fn bin_of(distance: u64) -> usize {
    if distance == 0 {
        0
    } else {
        64 - distance.leading_zeros() as usize
    }
}

/// Half-open distance range `[lo, hi)` covered by bin `i`.
pub fn bin_bounds(i: usize) -> (u64, u64) {
    match i {
        0 => (0, 1),
        _ => (
            1u64 << (i - 1),
            1u64.checked_shl(i as u32).unwrap_or(u64::MAX),
        ),
    }
}

pub(crate) fn check_line_size(trace: &Trace, line_size: u64) -> Result<(), Undefined> {
    if !line_size.is_power_of_two() || line_size < trace.word_size() as u64 {
        return Err(Undefined::Parameter(format!(
            "line size {line_size} must be a power of two no smaller than the word size {}",
            trace.word_size()
        )));
    }
    Ok(())
}

/// Reuse distance of every memory access, in trace order.
pub fn reuse_distance_stream(trace: &Trace, line_size: u64) -> Result<Vec<Distance>, Undefined> {
    check_line_size(trace, line_size)?;
    Ok(stack_distances(&line_ids(trace, line_size)))
}

pub(crate) fn line_ids(trace: &Trace, line_size: u64) -> Vec<u64> {
    let shift = line_size.trailing_zeros();
    trace
        .memory_accesses()
        .map(|m| m.address >> shift)
        .collect()
}

pub(crate) fn stack_distances(lines: &[u64]) -> Vec<Distance> {
    let n = lines.len();
    let mut marked = Fenwick::new(n);
    let mut last_access: HashMap<u64, usize> = HashMap::with_capacity(n.min(1 << 20));
    let mut distances = Vec::with_capacity(n);
    for (now, &line) in lines.iter().enumerate() {
        match last_access.insert(line, now) {
            Some(previous) => {
                let between = marked.prefix(now) - marked.prefix(previous + 1);
                distances.push(Some(between as u64));
                marked.add(previous, -1);
            }
            None => distances.push(None),
        }
        marked.add(now, 1);
    }
    distances
}

struct Fenwick {
    tree: Vec<i64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, index: usize, delta: i64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `[0, end)`.
    fn prefix(&self, end: usize) -> i64 {
        let mut i = end;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReuseBin {
    pub lo: u64,
    pub hi: u64,
    pub probability: f64,
}

/// Histogram of reuse distances over logarithmic bins for one line size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseSignature {
    pub line_size: u64,
    pub accesses: usize,
    pub bins: Vec<ReuseBin>,
    /// Probability mass of cold accesses.
    pub cold_fraction: f64,
    /// Set when the trace has no memory accesses; all masses are then zero.
    pub empty: bool,
}

impl ReuseSignature {
    pub(crate) fn from_distances(line_size: u64, distances: &[Distance]) -> ReuseSignature {
        let total = distances.len();
        if total == 0 {
            return ReuseSignature {
                line_size,
                accesses: 0,
                bins: Vec::new(),
                cold_fraction: 0.0,
                empty: true,
            };
        }
        let mut counts: Vec<u64> = Vec::new();
        let mut cold = 0u64;
        for d in distances {
            match d {
                Some(d) => {
                    let b = bin_of(*d);
                    if counts.len() <= b {
                        counts.resize(b + 1, 0);
                    }
                    counts[b] += 1;
                }
                None => cold += 1,
            }
        }
        let bins = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let (lo, hi) = bin_bounds(i);
                ReuseBin {
                    lo,
                    hi,
                    probability: c as f64 / total as f64,
                }
            })
            .collect();
        ReuseSignature {
            line_size,
            accesses: total,
            bins,
            cold_fraction: cold as f64 / total as f64,
            empty: false,
        }
    }

    /// Probability of bin `i`, zero past the histogram's end.
    pub fn probability(&self, i: usize) -> f64 {
        self.bins.get(i).map_or(0.0, |b| b.probability)
    }
}

pub fn reuse_signature(trace: &Trace, line_size: u64) -> Result<ReuseSignature, Undefined> {
    let distances = reuse_distance_stream(trace, line_size)?;
    Ok(ReuseSignature::from_distances(line_size, &distances))
}
