use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use wlchar::oracle::oracle_report;
use wlchar::report::{analyze_trace, load, write_report, AnalysisConfig, AnalyzeError, Format};
use wlchar::synth::{generate, GeneratorKind, GeneratorSpec};
use wlchar::trace::{write_trace, IngestError, IngestOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;

/// Workload characterization of dynamic instruction traces.
#[derive(Debug, Parser)]
#[command(name = "wlchar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute every metric for a trace file.
    Analyze(AnalyzeArgs),
    /// Write a synthetic trace.
    Gen(GenArgs),
    /// Compute every metric with the brute-force reference implementations.
    Oracle(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    trace: PathBuf,
    /// Word size in bytes; defaults to the trace header.
    #[arg(long)]
    word_size: Option<u32>,
    /// Largest cache-line size in bytes.
    #[arg(long, default_value_t = 256)]
    max_line: u64,
    /// Largest number of low address bits cut in the entropy sweep.
    #[arg(long, default_value_t = 16)]
    entropy_lsb_max: u32,
    /// Add store-to-load dependencies to the schedules.
    #[arg(long)]
    memory_deps: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// sequential_scan, random_stream, repeated_address, strided_matmul,
    /// data_parallel_loop or dependent_chain_loop
    kind: GeneratorKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Element count, iteration count or matrix dimension.
    #[arg(long, default_value_t = 1024)]
    n: u64,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long)]
    lanes: Option<u64>,
    /// Events per loop iteration.
    #[arg(long)]
    body: Option<u64>,
    /// Address space of random_stream in bytes.
    #[arg(long)]
    space: Option<u64>,
    #[arg(long)]
    word_size: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

fn classify(error: AnalyzeError) -> Failure {
    let code = match &error {
        AnalyzeError::Config(_) => EXIT_USAGE,
        AnalyzeError::Ingest {
            source: IngestError::Io(_),
            ..
        } => EXIT_IO,
        AnalyzeError::Ingest { .. } => EXIT_INVALID,
    };
    Failure::new(code, error)
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))
                .map_err(|e| Failure::new(EXIT_IO, e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn analyze(args: AnalyzeArgs, oracle: bool) -> Result<(), Failure> {
    let config = AnalysisConfig {
        word_size: args.word_size,
        max_line_size: args.max_line,
        entropy_lsb_max: args.entropy_lsb_max,
        memory_deps: args.memory_deps,
    };
    let trace = load(&args.trace, IngestOptions::default()).map_err(classify)?;
    let report = if oracle {
        oracle_report(&trace, &config)
    } else {
        analyze_trace(&trace, &config)
    }
    .map_err(classify)?;
    let format = match args.format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Csv => Format::Csv,
    };
    let out = open_output(args.out.as_deref())?;
    write_report(&report, format, out)
        .context("cannot write report")
        .map_err(|e| Failure::new(EXIT_IO, e))
}

fn gen(args: GenArgs) -> Result<(), Failure> {
    let mut spec = GeneratorSpec::new(args.kind, args.n).seed(args.seed);
    if let Some(stride) = args.stride {
        spec = spec.stride(stride);
    }
    if let Some(lanes) = args.lanes {
        spec = spec.lanes(lanes);
    }
    if let Some(body) = args.body {
        spec = spec.body(body);
    }
    if let Some(space) = args.space {
        spec = spec.space(space);
    }
    if let Some(word) = args.word_size {
        spec = spec.word_size(word);
    }
    let trace = generate(&spec).map_err(|e| Failure::new(EXIT_USAGE, e))?;
    let out = open_output(args.out.as_deref())?;
    write_trace(&trace, out)
        .context("cannot write trace")
        .map_err(|e| Failure::new(EXIT_IO, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => analyze(args, false),
        Command::Oracle(args) => analyze(args, true),
        Command::Gen(args) => gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("wlchar: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
