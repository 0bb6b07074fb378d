use serde::{Deserialize, Serialize};

use crate::trace::Trace;
use crate::Undefined;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    /// Low address bits dropped before counting.
    pub k: u32,
    /// Shannon entropy in bits.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub per_lsb_cut: Vec<EntropyPoint>,
    pub distinct_addresses: usize,
}

/// Shannon entropy of the per-access address stream after dropping the `k`
/// least-significant bits. Probabilities are relative access frequencies.
pub fn memory_entropy(trace: &Trace, k: u32) -> Result<f64, Undefined> {
    check_cut(trace, k)?;
    let sorted = sorted_addresses(trace)?;
    Ok(entropy_of_sorted(&sorted, k))
}

/// Entropy for every cut `0..=k_max`, plus the number of distinct full addresses.
pub fn entropy_sweep(trace: &Trace, k_max: u32) -> Result<EntropyReport, Undefined> {
    check_cut(trace, k_max)?;
    let sorted = sorted_addresses(trace)?;
    let distinct_addresses = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    let per_lsb_cut = (0..=k_max)
        .map(|k| EntropyPoint {
            k,
            entropy: entropy_of_sorted(&sorted, k),
        })
        .collect();
    Ok(EntropyReport {
        per_lsb_cut,
        distinct_addresses,
    })
}

fn check_cut(trace: &Trace, k: u32) -> Result<(), Undefined> {
    if k >= trace.address_bits() {
        return Err(Undefined::Parameter(format!(
            "lsb cut {k} must be below the address width {}",
            trace.address_bits()
        )));
    }
    Ok(())
}

fn sorted_addresses(trace: &Trace) -> Result<Vec<u64>, Undefined> {
    let mut addresses: Vec<u64> = trace.memory_accesses().map(|m| m.address).collect();
    if addresses.is_empty() {
        return Err(Undefined::NoMemoryAccesses);
    }
    addresses.sort_unstable();
    Ok(addresses)
}

// Shifting preserves order, so equal shifted values stay adjacent.
fn entropy_of_sorted(sorted: &[u64], k: u32) -> f64 {
    let total = sorted.len() as f64;
    let mut entropy = 0.0;
    for run in sorted.chunk_by(|a, b| a >> k == b >> k) {
        let p = run.len() as f64 / total;
        entropy -= p * p.log2();
    }
    if entropy <= 0.0 {
        0.0
    } else {
        entropy
    }
}
