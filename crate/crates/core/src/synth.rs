//! Deterministic synthetic workloads.
//!
//! Each generator emits a valid trace with explicit def/use chains, one
//! static block per loop body and `idx` flags set on induction updates.
//! Only `random_stream` consumes the seed: addresses come from
//! xoshiro256++ seeded through SplitMix64 (`seed_from_u64`), one
//! `next_u64()` per access, reduced as `(x mod (space / word)) · word`
//! with `space / word` a power of two.
//!
//! Expected metric profiles:
//!
//! | kind                   | memory                         | parallelism                        |
//! |------------------------|--------------------------------|------------------------------------|
//! | `sequential_scan`      | high spatial locality          | one load per iteration             |
//! | `random_stream`        | spatial locality ≈ 0           | `lanes` scattered loads per cycle  |
//! | `repeated_address`     | entropy 0, spatial locality 0  | serial induction chain             |
//! | `strided_matmul`       | row reads adjacent, columns not| dlp2 < dlp1                        |
//! | `data_parallel_loop`   | in/out streams                 | smart BBLP = PBBLP = iterations    |
//! | `dependent_chain_loop` | in/out streams                 | BBLP = PBBLP = 1                   |

use std::fmt;
use std::str::FromStr;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::trace::{MemAccess, Opcode, Trace, TraceEvent, ValueId, DEFAULT_ADDRESS_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    SequentialScan,
    RandomStream,
    RepeatedAddress,
    StridedMatmul,
    DataParallelLoop,
    DependentChainLoop,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 6] = [
        GeneratorKind::SequentialScan,
        GeneratorKind::RandomStream,
        GeneratorKind::RepeatedAddress,
        GeneratorKind::StridedMatmul,
        GeneratorKind::DataParallelLoop,
        GeneratorKind::DependentChainLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::SequentialScan => "sequential_scan",
            GeneratorKind::RandomStream => "random_stream",
            GeneratorKind::RepeatedAddress => "repeated_address",
            GeneratorKind::StridedMatmul => "strided_matmul",
            GeneratorKind::DataParallelLoop => "data_parallel_loop",
            GeneratorKind::DependentChainLoop => "dependent_chain_loop",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SynthError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("unknown generator `{0}`")]
    UnknownKind(String),
    #[error("parameter `{0}` must be at least {1}")]
    TooSmall(&'static str, u64),
    #[error("parameter `{0}` must be a power of two")]
    NotPowerOfTwo(&'static str),
    #[error("generated addresses overflow the {0}-bit address space")]
    AddressOverflow(u32),
}

/// Parameters of one synthetic workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Accesses for the stream kinds, matrix dimension for `strided_matmul`,
    /// iterations for the loop kinds.
    pub n: u64,
    /// Element stride of `sequential_scan`.
    pub stride: u64,
    /// Accesses per loop iteration (unroll factor).
    pub lanes: u64,
    /// Instructions per iteration of the loop kinds; at least 6.
    pub body: u64,
    /// Bytes of address space `random_stream` draws from; a power of two.
    pub space: u64,
    pub word_size: u32,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            stride: 1,
            lanes: if kind == GeneratorKind::RandomStream {
                8
            } else {
                1
            },
            body: 6,
            space: 1 << 24,
            word_size: 4,
            seed: 0,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn lanes(mut self, lanes: u64) -> Self {
        self.lanes = lanes;
        self
    }

    pub fn stride(mut self, stride: u64) -> Self {
        self.stride = stride;
        self
    }

    pub fn body(mut self, body: u64) -> Self {
        self.body = body;
        self
    }

    pub fn space(mut self, space: u64) -> Self {
        self.space = space;
        self
    }

    pub fn word_size(mut self, word_size: u32) -> Self {
        self.word_size = word_size;
        self
    }

    fn check(&self) -> Result<(), SynthError> {
        for (name, value, min) in [
            ("n", self.n, 1),
            ("stride", self.stride, 1),
            ("lanes", self.lanes, 1),
            ("body", self.body, 6),
        ] {
            if value < min {
                return Err(SynthError::TooSmall(name, min));
            }
        }
        if !self.word_size.is_power_of_two() || self.word_size > 64 {
            return Err(SynthError::NotPowerOfTwo("word_size"));
        }
        if self.kind == GeneratorKind::RandomStream
            && (!self.space.is_power_of_two() || self.space < self.word_size as u64)
        {
            return Err(SynthError::NotPowerOfTwo("space"));
        }
        Ok(())
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Trace, SynthError> {
    spec.check()?;
    let mut b = Builder::new(spec.word_size);
    match spec.kind {
        GeneratorKind::SequentialScan => {
            let step = spec.stride.checked_mul(spec.word_size as u64);
            let addresses = (0..spec.n).map(|i| step.and_then(|s| i.checked_mul(s)));
            b.streaming_loop(spec.lanes, addresses)?;
        }
        GeneratorKind::RandomStream => {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
            let words = spec.space / spec.word_size as u64;
            let word = spec.word_size as u64;
            let addresses = (0..spec.n).map(move |_| Some((rng.next_u64() & (words - 1)) * word));
            b.streaming_loop(spec.lanes, addresses)?;
        }
        GeneratorKind::RepeatedAddress => {
            b.streaming_loop(spec.lanes, (0..spec.n).map(|_| Some(0x1000)))?;
        }
        GeneratorKind::StridedMatmul => b.matmul(spec.n, spec.lanes)?,
        GeneratorKind::DataParallelLoop => b.element_loop(spec.n, spec.body, false)?,
        GeneratorKind::DependentChainLoop => b.element_loop(spec.n, spec.body, true)?,
    }
    Ok(b.finish())
}

struct Builder {
    events: Vec<TraceEvent>,
    next_value: ValueId,
    word_size: u32,
}

impl Builder {
    fn new(word_size: u32) -> Self {
        Builder {
            events: Vec::new(),
            next_value: 0,
            word_size,
        }
    }

    fn emit(
        &mut self,
        sid: u64,
        opcode: Opcode,
        uses: &[ValueId],
        mem: Option<u64>,
        block: (u64, u64),
        idx: bool,
    ) -> ValueId {
        let def = self.next_value;
        let defines = !matches!(opcode, Opcode::Store | Opcode::Branch);
        if defines {
            self.next_value += 1;
        }
        self.events.push(TraceEvent {
            seq: self.events.len() as u64,
            static_id: sid,
            opcode,
            def: defines.then_some(def),
            uses: uses.to_vec(),
            mem: mem.map(|a| MemAccess::new(a, self.word_size)),
            bb_static: block.0,
            bb_instance: block.1,
            index_update: idx,
        });
        def
    }

    /// `i += 1; cmp i; br` around the body of one iteration.
    fn induction(&mut self, sid: u64, prev: Option<ValueId>, block: (u64, u64)) -> ValueId {
        self.emit(sid, Opcode::Add, prev.as_slice(), None, block, true)
    }

    fn latch(&mut self, sid: u64, i: ValueId, block: (u64, u64)) {
        let c = self.emit(sid, Opcode::Cmp, &[i], None, block, false);
        self.emit(sid + 1, Opcode::Branch, &[c], None, block, false);
    }

    /// One block: per iteration an induction update, `lanes` loads
    /// addressed off the induction value, and the loop latch.
    fn streaming_loop(
        &mut self,
        lanes: u64,
        addresses: impl Iterator<Item = Option<u64>>,
    ) -> Result<(), SynthError> {
        let mut i = None;
        let mut addresses = addresses.peekable();
        let mut iteration = 0;
        while addresses.peek().is_some() {
            let block = (1, iteration);
            let idx = self.induction(0, i, block);
            for lane in 0..lanes {
                let Some(address) = addresses.next() else {
                    break;
                };
                let address = address.ok_or(SynthError::AddressOverflow(DEFAULT_ADDRESS_BITS))?;
                self.emit(1 + lane, Opcode::Load, &[idx], Some(address), block, false);
            }
            self.latch(1 + lanes, idx, block);
            i = Some(idx);
            iteration += 1;
        }
        Ok(())
    }

    /// Naive i-j-k product of row-major `n × n` matrices, inner loop
    /// unrolled by `lanes`.
    fn matmul(&mut self, n: u64, lanes: u64) -> Result<(), SynthError> {
        let word = self.word_size as u64;
        let size = n
            .checked_mul(n)
            .and_then(|e| e.checked_mul(word))
            .ok_or(SynthError::AddressOverflow(DEFAULT_ADDRESS_BITS))?;
        let (a, b, c) = (0, size, 2 * size);
        c.checked_add(size)
            .ok_or(SynthError::AddressOverflow(DEFAULT_ADDRESS_BITS))?;
        let mut i_val = None;
        let mut inner_instance = 0;
        let mut j_instance = 0;
        for i in 0..n {
            let i_block = (1, i);
            let iv = self.induction(0, i_val, i_block);
            self.latch(1, iv, i_block);
            i_val = Some(iv);
            let mut j_val = None;
            for j in 0..n {
                let head = (2, j_instance);
                let jv = self.induction(10, j_val, head);
                let mut sum = self.emit(11, Opcode::Add, &[], None, head, false);
                self.latch(12, jv, head);
                j_val = Some(jv);
                let mut k_val = None;
                let mut k = 0;
                while k < n {
                    let body = (3, inner_instance);
                    let kv = self.induction(20, k_val, body);
                    let width = lanes.min(n - k);
                    let row: Vec<ValueId> = (0..width)
                        .map(|l| {
                            let address = a + ((i * n) + k + l) * word;
                            self.emit(21 + l, Opcode::Load, &[iv, kv], Some(address), body, false)
                        })
                        .collect();
                    let column: Vec<ValueId> = (0..width)
                        .map(|l| {
                            let address = b + ((k + l) * n + j) * word;
                            self.emit(
                                21 + lanes + l,
                                Opcode::Load,
                                &[kv, jv],
                                Some(address),
                                body,
                                false,
                            )
                        })
                        .collect();
                    for l in 0..width {
                        let sid = 21 + 2 * lanes + 2 * l;
                        let product = self.emit(
                            sid,
                            Opcode::Mul,
                            &[row[l as usize], column[l as usize]],
                            None,
                            body,
                            false,
                        );
                        sum = self.emit(sid + 1, Opcode::Add, &[sum, product], None, body, false);
                    }
                    self.latch(21 + 4 * lanes, kv, body);
                    k_val = Some(kv);
                    k += width;
                    inner_instance += 1;
                }
                let tail = (4, j_instance);
                let address = c + (i * n + j) * word;
                self.emit(
                    30,
                    Opcode::Store,
                    &[sum, iv, jv],
                    Some(address),
                    tail,
                    false,
                );
                j_instance += 1;
            }
        }
        Ok(())
    }

    /// `out[i] = f(in[i])` per iteration; with `carried`, each iteration also
    /// folds into an accumulator so iterations form one dependency chain.
    fn element_loop(
        &mut self,
        iterations: u64,
        body: u64,
        carried: bool,
    ) -> Result<(), SynthError> {
        let word = self.word_size as u64;
        let input = 0x10000u64;
        let output = iterations
            .checked_mul(word)
            .and_then(|bytes| bytes.checked_add(input))
            .ok_or(SynthError::AddressOverflow(DEFAULT_ADDRESS_BITS))?;
        output
            .checked_add(iterations * word)
            .ok_or(SynthError::AddressOverflow(DEFAULT_ADDRESS_BITS))?;
        let mut i = None;
        let mut acc: Option<ValueId> = None;
        for t in 0..iterations {
            let block = (1, t);
            let iv = self.induction(0, i, block);
            let mut v = self.emit(1, Opcode::Load, &[iv], Some(input + t * word), block, false);
            for extra in 0..body - 6 {
                v = self.emit(2 + extra, Opcode::Mul, &[v], None, block, false);
            }
            let sid = body - 4;
            v = if carried {
                let uses: Vec<ValueId> = acc.into_iter().chain([v]).collect();
                let folded = self.emit(sid, Opcode::Add, &uses, None, block, false);
                acc = Some(folded);
                folded
            } else {
                self.emit(sid, Opcode::Mul, &[v, v], None, block, false)
            };
            self.emit(
                sid + 1,
                Opcode::Store,
                &[iv, v],
                Some(output + t * word),
                block,
                false,
            );
            self.latch(sid + 2, iv, block);
            i = Some(iv);
        }
        Ok(())
    }

    fn finish(self) -> Trace {
        Trace::new(self.events, self.word_size, DEFAULT_ADDRESS_BITS)
            .expect("generators emit valid traces")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallelism::{bblp, pbblp, schedule_bblp};
    use crate::trace::{build_dependency_graph, instance_counts, serialize};

    #[test]
    fn sequential_scan_layout() {
        let trace = generate(&GeneratorSpec::new(GeneratorKind::SequentialScan, 16)).unwrap();
        let addresses: Vec<u64> = trace.memory_accesses().map(|m| m.address).collect();
        assert_eq!(addresses, (0..16).map(|i| 4 * i).collect::<Vec<_>>());
        assert_eq!(trace.static_block_count(), 1);
        assert!(trace
            .events()
            .iter()
            .all(|e| e.opcode != Opcode::Load || e.mem.unwrap().size == 4));
    }

    #[test]
    fn repeated_address_is_one_address() {
        let trace = generate(&GeneratorSpec::new(GeneratorKind::RepeatedAddress, 100)).unwrap();
        assert_eq!(trace.memory_access_count(), 100);
        assert_eq!(trace.distinct_addresses(), 1);
    }

    #[test]
    fn loop_bodies_have_requested_size() {
        for kind in [
            GeneratorKind::DataParallelLoop,
            GeneratorKind::DependentChainLoop,
        ] {
            for body in [6, 9] {
                let trace = generate(&GeneratorSpec::new(kind, 4).body(body)).unwrap();
                assert_eq!(trace.len() as u64, 4 * body);
                assert_eq!(instance_counts(&trace)[&1], 4);
            }
        }
    }

    #[test]
    fn data_parallel_loop_block_scores() {
        let trace = generate(&GeneratorSpec::new(GeneratorKind::DataParallelLoop, 4)).unwrap();
        let deps = build_dependency_graph(&trace, false);
        assert_eq!(bblp(&schedule_bblp(&trace, &deps, false), &trace), Ok(1.0));
        assert_eq!(bblp(&schedule_bblp(&trace, &deps, true), &trace), Ok(4.0));
        assert_eq!(pbblp(&trace, &deps).average, Ok(4.0));
        let chained = generate(&GeneratorSpec::new(GeneratorKind::DependentChainLoop, 4)).unwrap();
        let deps = build_dependency_graph(&chained, false);
        assert_eq!(
            bblp(&schedule_bblp(&chained, &deps, true), &chained),
            Ok(1.0)
        );
        assert_eq!(pbblp(&chained, &deps).average, Ok(1.0));
    }

    #[test]
    fn matmul_touches_every_element() {
        let n = 4;
        let trace =
            generate(&GeneratorSpec::new(GeneratorKind::StridedMatmul, n).lanes(2)).unwrap();
        let loads = trace
            .events()
            .iter()
            .filter(|e| e.opcode == Opcode::Load)
            .count() as u64;
        let stores = trace
            .events()
            .iter()
            .filter(|e| e.opcode == Opcode::Store)
            .count() as u64;
        assert_eq!(loads, 2 * n * n * n);
        assert_eq!(stores, n * n);
        assert_eq!(trace.distinct_addresses() as u64, 3 * n * n);
    }

    #[test]
    fn random_stream_is_seeded() {
        let spec = GeneratorSpec::new(GeneratorKind::RandomStream, 64).space(1 << 20);
        let a = serialize(&generate(&spec.clone().seed(7)).unwrap());
        assert_eq!(a, serialize(&generate(&spec.clone().seed(7)).unwrap()));
        assert_ne!(a, serialize(&generate(&spec.clone().seed(8)).unwrap()));
        let trace = generate(&spec.seed(7)).unwrap();
        assert!(trace
            .memory_accesses()
            .all(|m| m.address < 1 << 20 && m.address % 4 == 0));
    }

    #[test]
    fn bad_parameters() {
        assert_eq!(
            generate(&GeneratorSpec::new(GeneratorKind::SequentialScan, 0)),
            Err(SynthError::TooSmall("n", 1))
        );
        assert_eq!(
            generate(&GeneratorSpec::new(GeneratorKind::DataParallelLoop, 2).body(5)),
            Err(SynthError::TooSmall("body", 6))
        );
        assert_eq!(
            generate(&GeneratorSpec::new(GeneratorKind::SequentialScan, 4).stride(u64::MAX)),
            Err(SynthError::AddressOverflow(64))
        );
        assert!("nope".parse::<GeneratorKind>().is_err());
        assert_eq!("strided_matmul".parse(), Ok(GeneratorKind::StridedMatmul));
    }
}
