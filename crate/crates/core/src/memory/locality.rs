//! Spatial locality from reuse-distance changes under line-size doubling.
//!
//! For a line-size pair `(b, 2b)` every access contributes one transition
//! from its bin at `b` to its bin at `2b`. Cold accesses sit in an extra
//! `∞` bin, placed after all finite bins. Doubling the line never increases
//! a distance, so mass only moves to the same bin or a lower one; an
//! access counts towards spatial locality when its bin strictly drops,
//! including `∞` -> finite (a neighbour brought the line in).

use serde::{Deserialize, Serialize};

use super::reuse::{bin_of, check_line_size, line_ids, stack_distances, Distance, ReuseSignature};
use crate::trace::Trace;
use crate::Undefined;

/// Transition probabilities between reuse-distance bins at `b` and `2b`.
///
/// Rows and columns run over `0..finite_bins` followed by the cold bin at
/// index `finite_bins`. Each non-empty row sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionMap {
    pub line_size: u64,
    pub finite_bins: usize,
    /// Accesses that fell into each row.
    pub row_counts: Vec<u64>,
    pub cells: Vec<Vec<f64>>,
}

impl DistributionMap {
    pub fn cold_index(&self) -> usize {
        self.finite_bins
    }

    pub fn doubled_line_size(&self) -> u64 {
        self.line_size * 2
    }

    pub fn row_is_empty(&self, row: usize) -> bool {
        self.row_counts[row] == 0
    }

    pub fn total_accesses(&self) -> u64 {
        self.row_counts.iter().sum()
    }

    pub(crate) fn from_distances(line_size: u64, at_b: &[Distance], at_2b: &[Distance]) -> Self {
        debug_assert_eq!(at_b.len(), at_2b.len());
        let finite_bins = at_b
            .iter()
            .chain(at_2b)
            .flatten()
            .map(|&d| bin_of(d) + 1)
            .max()
            .unwrap_or(0);
        let size = finite_bins + 1;
        let index = |d: &Distance| d.map_or(finite_bins, bin_of);
        let mut counts = vec![vec![0u64; size]; size];
        for (small, large) in at_b.iter().zip(at_2b) {
            counts[index(small)][index(large)] += 1;
        }
        let row_counts: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
        let cells = counts
            .iter()
            .zip(&row_counts)
            .map(|(row, &total)| {
                row.iter()
                    .map(|&c| {
                        if total == 0 {
                            0.0
                        } else {
                            c as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect();
        DistributionMap {
            line_size,
            finite_bins,
            row_counts,
            cells,
        }
    }

    /// Probability mass in `row` that lands in a strictly lower bin. For the
    /// cold row every finite column is lower.
    pub fn decrease_probability(&self, row: usize) -> f64 {
        self.cells[row][..row].iter().sum()
    }

    /// Score of the pair: Σ_i decrease(i) · p_i, with p_i the row's share
    /// of all accesses (the cold row weighted by the cold fraction).
    pub fn pair_score(&self) -> f64 {
        let total = self.total_accesses();
        if total == 0 {
            return 0.0;
        }
        let weighted: f64 = (0..self.cells.len())
            .map(|i| self.decrease_probability(i) * self.row_counts[i] as f64 / total as f64)
            .sum();
        weighted.abs()
    }
}

pub fn distribution_map(trace: &Trace, line_size: u64) -> Result<DistributionMap, Undefined> {
    check_line_size(trace, line_size)?;
    if trace.memory_access_count() == 0 {
        return Err(Undefined::NoMemoryAccesses);
    }
    let at_b = distances(trace, line_size);
    let at_2b = distances(trace, line_size * 2);
    Ok(DistributionMap::from_distances(line_size, &at_b, &at_2b))
}

fn distances(trace: &Trace, line_size: u64) -> Vec<Distance> {
    stack_distances(&line_ids(trace, line_size))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub line_size: u64,
    pub doubled: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialLocalityReport {
    pub per_pair: Vec<PairScore>,
    pub total: f64,
}

/// Everything derived from the reuse-distance streams of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityProfile {
    /// One per line size, from the word size up to the maximum line size.
    pub signatures: Vec<ReuseSignature>,
    /// One per `(b, 2b)` pair; empty when the trace has no memory accesses.
    pub maps: Vec<DistributionMap>,
    pub locality: Result<SpatialLocalityReport, Undefined>,
}

/// Line sizes word_size, 2·word_size, … up to `max_line_size`.
pub fn line_sizes(trace: &Trace, max_line_size: u64) -> Result<Vec<u64>, Undefined> {
    let word = trace.word_size() as u64;
    if !max_line_size.is_power_of_two() || max_line_size <= word {
        return Err(Undefined::Parameter(format!(
            "max line size {max_line_size} must be a power of two above the word size {word}"
        )));
    }
    Ok(std::iter::successors(Some(word), |&b| Some(b * 2))
        .take_while(|&b| b <= max_line_size)
        .collect())
}

/// Signatures, distribution maps and the spatial-locality score. The
/// distance stream of each line size is computed once, on its own thread.
/// Only parameter errors fail the whole profile.
pub fn locality_profile(trace: &Trace, max_line_size: u64) -> Result<LocalityProfile, Undefined> {
    let sizes = line_sizes(trace, max_line_size)?;
    let streams: Vec<Vec<Distance>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sizes
            .iter()
            .map(|&b| scope.spawn(move || distances(trace, b)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("reuse-distance worker panicked"))
            .collect()
    });
    let signatures = sizes
        .iter()
        .zip(&streams)
        .map(|(&b, d)| ReuseSignature::from_distances(b, d))
        .collect();
    if trace.memory_access_count() == 0 {
        return Ok(LocalityProfile {
            signatures,
            maps: Vec::new(),
            locality: Err(Undefined::NoMemoryAccesses),
        });
    }
    let maps: Vec<DistributionMap> = sizes
        .windows(2)
        .zip(streams.windows(2))
        .map(|(b, d)| DistributionMap::from_distances(b[0], &d[0], &d[1]))
        .collect();
    let locality = Ok(combine(trace.word_size() as u64, &maps));
    Ok(LocalityProfile {
        signatures,
        maps,
        locality,
    })
}

/// Weighted mean of pair scores; pair `(b, 2b)` has weight 2^-β with
/// β = log2(b / word) + 1, so the smallest pair weighs 1/2.
fn combine(word: u64, maps: &[DistributionMap]) -> SpatialLocalityReport {
    let mut weighted = 0.0;
    let mut weights = 0.0;
    let per_pair = maps
        .iter()
        .map(|map| {
            let beta = (map.line_size / word).trailing_zeros() as i32 + 1;
            let weight = 2f64.powi(-beta);
            let score = map.pair_score();
            weighted += score * weight;
            weights += weight;
            PairScore {
                line_size: map.line_size,
                doubled: map.doubled_line_size(),
                score,
            }
        })
        .collect();
    SpatialLocalityReport {
        per_pair,
        total: weighted / weights,
    }
}

pub fn spatial_locality(
    trace: &Trace,
    max_line_size: u64,
) -> Result<SpatialLocalityReport, Undefined> {
    locality_profile(trace, max_line_size)?.locality
}
