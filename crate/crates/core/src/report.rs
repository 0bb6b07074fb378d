//! The combined metrics report, the analysis pipeline that fills it, and
//! its JSON and CSV encodings.
//!
//! Metrics that cannot be computed for a trace (no memory accesses, an
//! empty trace, no eligible blocks) are reported as `null` with a reason;
//! they never disappear from the JSON document.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{
    entropy_sweep, line_sizes, locality_profile, EntropyReport, ReuseSignature,
    SpatialLocalityReport,
};
use crate::parallelism::{parallelism_report, ParallelismReport};
use crate::trace::{
    build_dependency_graph, ingest_path, tag_index_updates, IngestError, IngestOptions, Trace,
};
use crate::Undefined;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Overrides the trace header when set; the report echoes the value used.
    pub word_size: Option<u32>,
    pub max_line_size: u64,
    pub entropy_lsb_max: u32,
    pub memory_deps: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            word_size: None,
            max_line_size: 256,
            entropy_lsb_max: 16,
            memory_deps: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// The efficient implementation.
    Fast,
    /// Brute-force reference implementations.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub events: usize,
    pub memory_accesses: usize,
    pub distinct_addresses: usize,
    pub blocks: usize,
    /// The trace carried no index-update flags, so they were inferred.
    pub index_flags_inferred: bool,
}

/// A metric value, or `null` with the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric<T> {
    pub value: Option<T>,
    pub reason: Option<String>,
}

impl<T> From<Result<T, Undefined>> for Metric<T> {
    fn from(result: Result<T, Undefined>) -> Self {
        match result {
            Ok(value) => Metric {
                value: Some(value),
                reason: None,
            },
            Err(e) => Metric {
                value: None,
                reason: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub engine: Engine,
    pub config: AnalysisConfig,
    pub trace: TraceMeta,
    pub entropy: Metric<EntropyReport>,
    pub reuse_signatures: Vec<ReuseSignature>,
    pub spatial_locality: Metric<SpatialLocalityReport>,
    pub parallelism: Metric<ParallelismReport>,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}")]
    Ingest {
        path: String,
        #[source]
        source: IngestError,
    },
}

/// Resolves the word size and rejects parameters the trace cannot support.
/// Returns the trace re-targeted to the resolved word size.
pub fn prepare(
    trace: &Trace,
    config: &AnalysisConfig,
) -> Result<(Trace, AnalysisConfig), AnalyzeError> {
    let word_size = config.word_size.unwrap_or(trace.word_size());
    let trace = trace
        .with_word_size(word_size)
        .map_err(|e| AnalyzeError::Config(e.to_string()))?;
    line_sizes(&trace, config.max_line_size).map_err(|e| AnalyzeError::Config(e.to_string()))?;
    if config.entropy_lsb_max >= trace.address_bits() {
        return Err(AnalyzeError::Config(format!(
            "entropy lsb max {} must be below the address width {}",
            config.entropy_lsb_max,
            trace.address_bits()
        )));
    }
    // tag only when the producer set no flag at all
    let trace = if trace.events().iter().any(|e| e.index_update) {
        trace
    } else {
        tag_index_updates(&trace)
    };
    let resolved = AnalysisConfig {
        word_size: Some(word_size),
        ..*config
    };
    Ok((trace, resolved))
}

pub(crate) fn trace_meta(original: &Trace) -> TraceMeta {
    TraceMeta {
        events: original.len(),
        memory_accesses: original.memory_access_count(),
        distinct_addresses: original.distinct_addresses(),
        blocks: original.static_block_count(),
        index_flags_inferred: !original.events().iter().any(|e| e.index_update),
    }
}

/// Runs every metric over an in-memory trace.
pub fn analyze_trace(
    trace: &Trace,
    config: &AnalysisConfig,
) -> Result<MetricsReport, AnalyzeError> {
    let (prepared, resolved) = prepare(trace, config)?;
    let t = &prepared;
    let (entropy, profile, parallelism) = std::thread::scope(|scope| {
        let entropy = scope.spawn(|| entropy_sweep(t, resolved.entropy_lsb_max));
        let profile = scope.spawn(|| locality_profile(t, resolved.max_line_size));
        let deps = build_dependency_graph(t, resolved.memory_deps);
        let parallelism = parallelism_report(t, &deps);
        (
            entropy.join().expect("entropy worker panicked"),
            profile.join().expect("locality worker panicked"),
            parallelism,
        )
    });
    let profile = profile.map_err(|e| AnalyzeError::Config(e.to_string()))?;
    Ok(MetricsReport {
        schema_version: SCHEMA_VERSION,
        engine: Engine::Fast,
        config: resolved,
        trace: trace_meta(trace),
        entropy: entropy.into(),
        reuse_signatures: profile.signatures,
        spatial_locality: profile.locality.into(),
        parallelism: parallelism.into(),
    })
}

pub fn load(path: &Path, options: IngestOptions) -> Result<Trace, AnalyzeError> {
    ingest_path(path, options).map_err(|source| AnalyzeError::Ingest {
        path: path.display().to_string(),
        source,
    })
}

/// Ingests the trace file at `path` and analyzes it.
pub fn analyze(path: &Path, config: &AnalysisConfig) -> Result<MetricsReport, AnalyzeError> {
    let trace = load(path, IngestOptions::default())?;
    analyze_trace(&trace, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// One flattened CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub metric: &'static str,
    pub parameter: String,
    pub value: f64,
}

impl MetricsReport {
    /// Rows for single-valued metrics.
    pub fn scalar_rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        let row = |metric, parameter: String, value| Row {
            metric,
            parameter,
            value,
        };
        if let Some(entropy) = &self.entropy.value {
            rows.push(row(
                "distinct_addresses",
                String::new(),
                entropy.distinct_addresses as f64,
            ));
        }
        if let Some(locality) = &self.spatial_locality.value {
            rows.push(row("slq_total", String::new(), locality.total));
        }
        if let Some(p) = &self.parallelism.value {
            rows.push(row("ilp_total", String::new(), p.ilp_total));
            for (op, v) in &p.ilp_specialized {
                rows.push(row("ilp_specialized", format!("op={op}"), *v));
            }
            rows.push(row("dlp1", String::new(), p.dlp1));
            rows.push(row("dlp2", String::new(), p.dlp2));
            rows.push(row("bblp_real", String::new(), p.bblp_real));
            rows.push(row("bblp_smart", String::new(), p.bblp_smart));
            if let Some(v) = p.pbblp {
                rows.push(row("pbblp", String::new(), v));
            }
            for (bb, v) in &p.per_block_pbblp {
                rows.push(row("pbblp_block", format!("bb={bb}"), *v));
            }
        }
        rows
    }

    /// Rows for swept metrics: entropy per LSB cut, reuse bins per line
    /// size, spatial locality per line-size pair.
    pub fn sweep_rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        if let Some(entropy) = &self.entropy.value {
            rows.extend(entropy.per_lsb_cut.iter().map(|p| Row {
                metric: "entropy",
                parameter: format!("k={}", p.k),
                value: p.entropy,
            }));
        }
        for sig in self.reuse_signatures.iter().filter(|s| !s.empty) {
            rows.extend(sig.bins.iter().map(|b| Row {
                metric: "reuse_bin",
                parameter: format!("line={};lo={};hi={}", sig.line_size, b.lo, b.hi),
                value: b.probability,
            }));
            rows.push(Row {
                metric: "reuse_cold",
                parameter: format!("line={}", sig.line_size),
                value: sig.cold_fraction,
            });
        }
        if let Some(locality) = &self.spatial_locality.value {
            rows.extend(locality.per_pair.iter().map(|p| Row {
                metric: "slq_pair",
                parameter: format!("b={};2b={}", p.line_size, p.doubled),
                value: p.score,
            }));
        }
        rows
    }
}

pub fn write_report<W: Write>(
    report: &MetricsReport,
    format: Format,
    mut out: W,
) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(&mut out);
            writer.write_record(["metric", "parameter", "value"])?;
            for row in report.sweep_rows().into_iter().chain(report.scalar_rows()) {
                writer.write_record([row.metric, &row.parameter, &row.value.to_string()])?;
            }
            writer.flush()?;
        }
    }
    out.flush()
}

pub fn emit(report: &MetricsReport, format: Format) -> Vec<u8> {
    let mut buf = Vec::new();
    write_report(report, format, &mut buf).expect("writing to a Vec cannot fail");
    buf
}
