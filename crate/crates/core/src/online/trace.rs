use std::io::Write;

use serde::{Deserialize, Serialize};

use super::drift::Position;
use crate::instance::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Arrive,
    Assign,
    Unserved,
    Pickup,
    Deliver,
    Drift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub ts: Time,
    pub event: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub server: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    pub reward_delta: u64,
}

/// One JSON object per line.
pub fn write_ndjson<W: Write>(events: &[TraceEvent], mut out: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
