//! JSON-Lines trace files.
//!
//! The first line may be a header `{"word_size": 4, "address_bits": 64}`;
//! every other line is one event:
//!
//! ```text
//! {"seq":0,"sid":3,"op":"load","def":5,"use":[2],"addr":"0x10","size":4,"bb":1,"bbi":0,"idx":false}
//! ```
//!
//! Addresses are hex strings so 64-bit values survive JSON readers that
//! store numbers as doubles.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    MemAccess, Opcode, Trace, TraceEvent, ValidationError, Validator, ValueId,
    DEFAULT_ADDRESS_BITS, DEFAULT_WORD_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Used when the stream has no header line.
    pub word_size: u32,
    /// Used when the stream has no header line.
    pub address_bits: u32,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            word_size: DEFAULT_WORD_SIZE,
            address_bits: DEFAULT_ADDRESS_BITS,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}")]
    Invalid {
        line: usize,
        #[source]
        source: ValidationError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Malformed { line, .. } | IngestError::Invalid { line, .. } => Some(*line),
            IngestError::Io(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    word_size: u32,
    address_bits: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent<'a> {
    seq: u64,
    sid: u64,
    #[serde(borrow)]
    op: std::borrow::Cow<'a, str>,
    #[serde(default)]
    def: Option<ValueId>,
    #[serde(rename = "use", default)]
    uses: Vec<ValueId>,
    #[serde(default)]
    addr: Option<String>,
    #[serde(default)]
    size: Option<u32>,
    bb: u64,
    bbi: u64,
    #[serde(default)]
    idx: bool,
}

impl RawEvent<'_> {
    fn into_event(self) -> Result<TraceEvent, String> {
        let mem = match (self.addr, self.size) {
            (None, None) => None,
            (Some(addr), Some(size)) => Some(MemAccess::new(parse_hex(&addr)?, size)),
            (Some(_), None) => return Err("`addr` given without `size`".into()),
            (None, Some(_)) => return Err("`size` given without `addr`".into()),
        };
        Ok(TraceEvent {
            seq: self.seq,
            static_id: self.sid,
            opcode: Opcode::parse(&self.op),
            def: self.def,
            uses: self.uses,
            mem,
            bb_static: self.bb,
            bb_instance: self.bbi,
            index_update: self.idx,
        })
    }
}

fn parse_hex(text: &str) -> Result<u64, String> {
    let digits = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .ok_or_else(|| format!("address `{text}` lacks 0x prefix"))?;
    u64::from_str_radix(digits, 16).map_err(|e| format!("address `{text}`: {e}"))
}

/// Reads and validates a JSON-Lines trace. Blank lines are skipped.
pub fn ingest<R: BufRead>(reader: R, options: IngestOptions) -> Result<Trace, IngestError> {
    let mut word_size = options.word_size;
    let mut address_bits = options.address_bits;
    let mut validator: Option<Validator> = None;
    let mut events = Vec::new();

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if validator.is_none() && events.is_empty() && text.contains("\"word_size\"") {
            let header: Header =
                serde_json::from_str(text).map_err(|e| IngestError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
            word_size = header.word_size;
            address_bits = header.address_bits;
            validator = Some(Validator::new(word_size, address_bits).map_err(|source| {
                IngestError::Invalid {
                    line: line_no,
                    source,
                }
            })?);
            continue;
        }
        let validator = match &mut validator {
            Some(v) => v,
            None => {
                validator.insert(Validator::new(word_size, address_bits).map_err(|source| {
                    IngestError::Invalid {
                        line: line_no,
                        source,
                    }
                })?)
            }
        };
        let raw: RawEvent = serde_json::from_str(text).map_err(|e| IngestError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let event = raw.into_event().map_err(|message| IngestError::Malformed {
            line: line_no,
            message,
        })?;
        validator
            .check(events.len(), &event)
            .map_err(|source| IngestError::Invalid {
                line: line_no,
                source,
            })?;
        events.push(event);
    }
    if validator.is_none() {
        // empty stream: still reject a bad default configuration
        Validator::new(word_size, address_bits)
            .map_err(|source| IngestError::Invalid { line: 0, source })?;
    }
    Ok(Trace::from_parts_unchecked(events, word_size, address_bits))
}

pub fn ingest_path(path: &Path, options: IngestOptions) -> Result<Trace, IngestError> {
    let file = File::open(path)?;
    ingest(BufReader::with_capacity(1 << 16, file), options)
}

/// Writes `trace` in the JSON-Lines format, header first.
pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    let header = Header {
        word_size: trace.word_size(),
        address_bits: trace.address_bits(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for event in trace.events() {
        let raw = RawEvent {
            seq: event.seq,
            sid: event.static_id,
            op: std::borrow::Cow::Borrowed(event.opcode.name()),
            def: event.def,
            uses: event.uses.clone(),
            addr: event.mem.map(|m| format!("{:#x}", m.address)),
            size: event.mem.map(|m| m.size),
            bb: event.bb_static,
            bbi: event.bb_instance,
            idx: event.index_update,
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn serialize(trace: &Trace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    buf
}
