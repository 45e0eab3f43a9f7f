//! JSON persistence and CSV trace ingestion.

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Instance, Request, Time};
use crate::metric::{GraphFile, MetricError, MetricSpace, NodeId};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("invalid metric: {0}")]
    Metric(#[from] MetricError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for InstanceIoError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            return InstanceIoError::Io(e.into());
        }
        InstanceIoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Non-fatal notes produced while loading or ingesting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    DefaultedField {
        field: &'static str,
        value: String,
    },
    ShiftedArrival {
        order_id: String,
        from: Time,
        to: Time,
    },
    ExtendedDeadline {
        order_id: String,
        to: Time,
    },
}

impl std::fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadWarning::DefaultedField { field, value } => {
                write!(f, "field `{field}` missing, defaulted to {value}")
            }
            LoadWarning::ShiftedArrival { order_id, from, to } => {
                write!(f, "order {order_id}: arrival shifted from {from} to {to}")
            }
            LoadWarning::ExtendedDeadline { order_id, to } => {
                write!(f, "order {order_id}: deadline extended to {to}")
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    version: u32,
    metric: GraphFile,
    k: usize,
    initial_positions: Vec<NodeId>,
    eta: serde_json::Number,
    horizon: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed: Option<f64>,
    requests: Vec<Request>,
}

pub fn save_instance<W: Write>(instance: &Instance, mut sink: W) -> Result<(), InstanceIoError> {
    let doc = InstanceDoc {
        version: SCHEMA_VERSION,
        metric: instance.metric.to_graph_file(),
        k: instance.k,
        initial_positions: instance.initial_positions.clone(),
        eta: instance.eta.into(),
        horizon: instance.horizon,
        speed: Some(instance.speed),
        requests: instance.requests.clone(),
    };
    serde_json::to_writer_pretty(&mut sink, &doc)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn load_instance<R: Read>(source: R) -> Result<(Instance, Vec<LoadWarning>), InstanceIoError> {
    // Check the version before the strict parse so an old or future file is
    // reported as such rather than as an unknown-field error.
    let value: serde_json::Value = serde_json::from_reader(source)?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(InstanceIoError::SchemaVersionMismatch {
                found: v as u32,
                expected: SCHEMA_VERSION,
            })
        }
        None => {
            return Err(InstanceIoError::InvalidField {
                field: "version",
                reason: "missing or not an integer".into(),
            })
        }
    }
    let doc: InstanceDoc = serde_json::from_value(value).map_err(|e| InstanceIoError::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;

    let mut warnings = Vec::new();
    let eta = match (doc.eta.as_i64(), doc.eta.as_f64()) {
        (Some(i), _) => i,
        (None, Some(f)) if f.fract() == 0.0 => f as Time,
        _ => {
            return Err(InstanceIoError::InvalidField {
                field: "eta",
                reason: format!("{} is not an integer number of time units", doc.eta),
            })
        }
    };
    let speed = doc.speed.unwrap_or_else(|| {
        warnings.push(LoadWarning::DefaultedField {
            field: "speed",
            value: "1".into(),
        });
        1.0
    });
    let metric = MetricSpace::from_graph_file(&doc.metric)?;
    Ok((
        Instance {
            metric,
            requests: doc.requests,
            k: doc.k,
            initial_positions: doc.initial_positions,
            eta,
            horizon: doc.horizon,
            speed,
        },
        warnings,
    ))
}

/// Options for mapping a delivery trace onto an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvIngestOptions {
    pub k: usize,
    /// Explicit starting nodes; drawn uniformly with `seed` when `None`.
    pub initial_positions: Option<Vec<NodeId>>,
    pub seed: u64,
    pub eta: Time,
    pub speed: f64,
    /// Defaults to the latest delivery time.
    pub horizon: Option<Time>,
}

impl Default for CsvIngestOptions {
    fn default() -> Self {
        Self {
            k: 1,
            initial_positions: None,
            seed: 0,
            eta: 1,
            speed: 1.0,
            horizon: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    order_id: String,
    source_node: NodeId,
    dest_node: NodeId,
    arrival_ts: Time,
    pickup_deadline_ts: Time,
}

/// Reads `order_id,source_node,dest_node,arrival_ts,pickup_deadline_ts` rows.
///
/// Orders are sorted by arrival; an arrival that collides with an earlier one
/// is pushed forward one timestep at a time until free. Request ids are
/// reassigned in arrival order.
pub fn ingest_csv<R: Read>(
    source: R,
    metric: MetricSpace,
    opts: &CsvIngestOptions,
) -> Result<(Instance, Vec<LoadWarning>), InstanceIoError> {
    if opts.eta < 1 {
        return Err(InstanceIoError::InvalidField {
            field: "eta",
            reason: "must be >= 1".into(),
        });
    }
    let mut rows: Vec<TraceRow> = csv::Reader::from_reader(source)
        .deserialize()
        .collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.arrival_ts);

    let mut warnings = Vec::new();
    let mut requests = Vec::with_capacity(rows.len());
    let mut last_arrival: Option<Time> = None;
    for row in rows {
        let mut t_begin = row.arrival_ts;
        if let Some(prev) = last_arrival {
            if t_begin <= prev {
                let to = prev + opts.eta;
                warnings.push(LoadWarning::ShiftedArrival {
                    order_id: row.order_id.clone(),
                    from: t_begin,
                    to,
                });
                t_begin = to;
            }
        }
        let mut t_end = row.pickup_deadline_ts;
        if t_end < t_begin {
            warnings.push(LoadWarning::ExtendedDeadline {
                order_id: row.order_id.clone(),
                to: t_begin,
            });
            t_end = t_begin;
        }
        last_arrival = Some(t_begin);
        requests.push(Request {
            id: requests.len(),
            source: row.source_node,
            dest: row.dest_node,
            t_begin,
            t_end,
        });
    }

    let m = metric.node_count();
    let initial_positions = match &opts.initial_positions {
        Some(p) => p.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..opts.k).map(|_| rng.gen_range(0..m)).collect()
        }
    };
    let mut inst = Instance {
        metric,
        requests,
        k: opts.k,
        initial_positions,
        eta: opts.eta,
        horizon: 0,
        speed: opts.speed,
    };
    inst.horizon = opts.horizon.unwrap_or_else(|| {
        let last = inst
            .requests
            .iter()
            .filter(|r| r.source < m && r.dest < m)
            .map(|r| r.t_end + inst.travel_time(r.source, r.dest))
            .max()
            .unwrap_or(0);
        // round up onto the timestep grid
        (last + opts.eta - 1) / opts.eta * opts.eta
    });
    Ok((inst, warnings))
}
