//! Emulation trace records and their newline-delimited JSON encoding.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::platform::PeKind;
use crate::Nanos;

pub const TRACE_SCHEMA: &str = "emu-trace/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    Inject {
        instance_id: u64,
        app: String,
    },
    TaskReady {
        instance_id: u64,
        node: String,
    },
    SchedDecision {
        duration_ns: Nanos,
        policy: String,
        ready_len: usize,
        assigned: usize,
    },
    Dispatch {
        instance_id: u64,
        node: String,
        pe_id: usize,
    },
    TaskStart {
        instance_id: u64,
        node: String,
        pe_id: usize,
    },
    TransferStart {
        instance_id: u64,
        node: String,
        pe_id: usize,
        dir: Direction,
    },
    TransferEnd {
        instance_id: u64,
        node: String,
        pe_id: usize,
        dir: Direction,
    },
    TaskEnd {
        instance_id: u64,
        node: String,
        pe_id: usize,
        #[serde(default, skip_serializing_if = "core::ops::Not::not")]
        failed: bool,
    },
    InstanceComplete {
        instance_id: u64,
    },
    InstanceFailed {
        instance_id: u64,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: Nanos,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn new(t: Nanos, kind: EventKind) -> Self {
        Self { t, kind }
    }

    /// Events that delimit PE occupancy and therefore the makespan.
    pub fn is_task_event(&self) -> bool {
        matches!(
            self.kind,
            EventKind::TaskStart { .. }
                | EventKind::TaskEnd { .. }
                | EventKind::TransferStart { .. }
                | EventKind::TransferEnd { .. }
        )
    }

    /// Orders events at equal timestamps so that an interval ending at `t`
    /// precedes one starting at `t` and an instance is injected before its
    /// tasks become ready.
    fn rank(&self) -> u8 {
        match self.kind {
            EventKind::TaskEnd { .. } => 0,
            EventKind::TransferEnd {
                dir: Direction::Out,
                ..
            } => 0,
            EventKind::InstanceComplete { .. } | EventKind::InstanceFailed { .. } => 1,
            EventKind::Inject { .. } => 2,
            EventKind::TaskReady { .. } => 3,
            EventKind::SchedDecision { .. } => 4,
            EventKind::Dispatch { .. } => 5,
            EventKind::TaskStart { .. } => 6,
            EventKind::TransferStart {
                dir: Direction::In, ..
            } => 7,
            EventKind::TransferEnd {
                dir: Direction::In, ..
            } => 8,
            EventKind::TransferStart {
                dir: Direction::Out,
                ..
            } => 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeInfo {
    pub pe_id: usize,
    pub pe_type: String,
    pub kind: PeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pes: Vec<PeInfo>,
}

impl Default for TraceHeader {
    fn default() -> Self {
        Self {
            schema: TRACE_SCHEMA.to_string(),
            policy: None,
            pes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("trace is empty: missing schema header")]
    MissingHeader,
    #[error("unsupported trace schema {0} (expected {TRACE_SCHEMA})")]
    Version(String),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

impl Trace {
    pub fn push(&mut self, t: Nanos, kind: EventKind) {
        self.events.push(TraceEvent::new(t, kind));
    }

    /// Stable sort by timestamp, with the tie order of [`TraceEvent::rank`].
    pub fn sort(&mut self) {
        self.events.sort_by_key(|e| (e.t, e.rank()));
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }

    /// Header line followed by one event per line, each newline-terminated.
    pub fn to_ndjson(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, TraceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::MissingHeader)?;
        let header: TraceHeader =
            serde_json::from_str(first).map_err(|e| TraceError::Malformed {
                line: 1,
                reason: e.to_string(),
            })?;
        if header.schema != TRACE_SCHEMA {
            return Err(TraceError::Version(header.schema));
        }
        let mut events = Vec::new();
        for (i, line) in lines {
            let e: TraceEvent = serde_json::from_str(line).map_err(|e| TraceError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })?;
            events.push(e);
        }
        Ok(Self { header, events })
    }
}
