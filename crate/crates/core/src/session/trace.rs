//! Recorded input traces.
//!
//! Layout (little-endian):
//!
//! ```text
//! header:  "CFT1" | version u16 | config_hash [32] | duration_us u64
//! record:  arrival_us u64 | len u16 | frame bytes
//! ```
//!
//! Records are ordered by arrival time. Replay runs every tick scheduled
//! strictly before `duration_us`.

use std::path::Path;

use thiserror::Error;

use crate::transport::codec::{DecodeError, InputFrame};

pub const TRACE_MAGIC: [u8; 4] = *b"CFT1";
pub const TRACE_VERSION: u16 = 1;
pub const TRACE_HEADER_LEN: usize = 4 + 2 + 32 + 8;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a trace file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported trace version {0}")]
    UnsupportedVersion(u16),
    #[error("trace truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("record {index}: {source}")]
    Frame { index: usize, source: DecodeError },
    #[error("record {index} arrives before its predecessor")]
    NonMonotone { index: usize },
    #[error("record {index} arrives at or after the trace end")]
    PastEnd { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub version: u16,
    pub config_hash: [u8; 32],
    pub duration_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub arrival_us: u64,
    pub frame: InputFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(config_hash: [u8; 32], duration_us: u64) -> Self {
        Trace {
            header: TraceHeader {
                version: TRACE_VERSION,
                config_hash,
                duration_us,
            },
            records: Vec::new(),
        }
    }

    /// Builds a trace from records, sorting them stably by arrival.
    pub fn from_records(
        config_hash: [u8; 32],
        duration_us: u64,
        mut records: Vec<TraceRecord>,
    ) -> Result<Self, TraceError> {
        records.sort_by_key(|r| r.arrival_us);
        let mut t = Trace::new(config_hash, duration_us);
        for r in records {
            t.push(r.arrival_us, r.frame)?;
        }
        Ok(t)
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn duration_us(&self) -> u64 {
        self.header.duration_us
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, arrival_us: u64, frame: InputFrame) -> Result<(), TraceError> {
        let index = self.records.len();
        if self.records.last().is_some_and(|r| r.arrival_us > arrival_us) {
            return Err(TraceError::NonMonotone { index });
        }
        if arrival_us >= self.header.duration_us {
            return Err(TraceError::PastEnd { index });
        }
        self.records.push(TraceRecord { arrival_us, frame });
        Ok(())
    }

    /// Extends the trace end without adding records.
    pub fn set_duration_us(&mut self, duration_us: u64) {
        let last = self.records.last().map_or(0, |r| r.arrival_us + 1);
        self.header.duration_us = duration_us.max(last);
    }

    /// `self` followed by `other`, with `other`'s arrival and frame
    /// timestamps shifted by `self`'s duration.
    pub fn concat(&self, other: &Trace) -> Trace {
        let shift = self.header.duration_us;
        let mut out = self.clone();
        out.header.duration_us = shift + other.header.duration_us;
        out.records.extend(other.records.iter().map(|r| {
            let mut frame = r.frame;
            match &mut frame {
                InputFrame::Pose(f) => f.timestamp_us += shift,
                InputFrame::Controller(f) => f.timestamp_us += shift,
            }
            TraceRecord {
                arrival_us: r.arrival_us + shift,
                frame,
            }
        }));
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TRACE_HEADER_LEN + self.records.len() * 80);
        out.extend_from_slice(&TRACE_MAGIC);
        out.extend_from_slice(&self.header.version.to_le_bytes());
        out.extend_from_slice(&self.header.config_hash);
        out.extend_from_slice(&self.header.duration_us.to_le_bytes());
        for r in &self.records {
            let bytes = r.frame.encode();
            out.extend_from_slice(&r.arrival_us.to_le_bytes());
            out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TraceError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4)?.try_into().expect("4 bytes");
        if magic != TRACE_MAGIC {
            return Err(TraceError::BadMagic(magic));
        }
        let version = cur.u16()?;
        if version != TRACE_VERSION {
            return Err(TraceError::UnsupportedVersion(version));
        }
        let config_hash: [u8; 32] = cur.take(32)?.try_into().expect("32 bytes");
        let duration_us = cur.u64()?;
        let mut trace = Trace::new(config_hash, duration_us);
        let mut index = 0;
        while cur.pos < bytes.len() {
            let arrival_us = cur.u64()?;
            let len = cur.u16()? as usize;
            let frame = InputFrame::decode(cur.take(len)?)
                .map_err(|source| TraceError::Frame { index, source })?;
            trace.push(arrival_us, frame)?;
            index += 1;
        }
        Ok(trace)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TraceError> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or(TraceError::Truncated { offset: self.pos })?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, TraceError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u64(&mut self) -> Result<u64, TraceError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
