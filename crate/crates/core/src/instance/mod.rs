//! Requests, server configurations and complete problem instances.

mod generate;
mod io;

use std::collections::BTreeSet;
use std::fmt;

use crate::metric::{Dist, MetricSpace, NodeId};

pub use generate::{
    gen_partition_instance, gen_synthetic, gen_tiny, GenError, SyntheticParams, TinyLimits,
};
pub use io::{
    ingest_csv, load_instance, save_instance, CsvIngestOptions, InstanceIoError, LoadWarning,
    SCHEMA_VERSION,
};

/// Time in integer time units.
pub type Time = i64;

/// A delivery-style request: pick up at `source` within `[t_begin, t_end]`,
/// then travel to `dest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub id: usize,
    pub source: NodeId,
    pub dest: NodeId,
    pub t_begin: Time,
    pub t_end: Time,
}

impl Request {
    pub fn window(&self) -> Time {
        self.t_end - self.t_begin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub metric: MetricSpace,
    /// Requests in arrival order.
    pub requests: Vec<Request>,
    pub k: usize,
    pub initial_positions: Vec<NodeId>,
    /// Timestep size in time units.
    pub eta: Time,
    pub horizon: Time,
    /// Distance units per time unit.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BadNode {
        request: Option<usize>,
        node: NodeId,
        what: &'static str,
    },
    WindowInverted {
        request: usize,
    },
    NegativeStart {
        request: usize,
    },
    ExceedsHorizon {
        request: usize,
        delivered_at: Time,
    },
    NotSortedByArrival {
        request: usize,
    },
    DuplicateArrival {
        request: usize,
        other: usize,
    },
    IdNotPosition {
        request: usize,
        position: usize,
    },
    ServerCountMismatch {
        k: usize,
        positions: usize,
    },
    BadParameter(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadNode {
                request: Some(r),
                node,
                what,
            } => {
                write!(f, "request {r}: {what} node {node} out of range")
            }
            Violation::BadNode {
                request: None,
                node,
                what,
            } => {
                write!(f, "{what} node {node} out of range")
            }
            Violation::WindowInverted { request } => {
                write!(f, "request {request}: window inverted")
            }
            Violation::NegativeStart { request } => {
                write!(f, "request {request}: window starts before time 0")
            }
            Violation::ExceedsHorizon {
                request,
                delivered_at,
            } => {
                write!(
                    f,
                    "request {request}: delivery at {delivered_at} exceeds horizon"
                )
            }
            Violation::NotSortedByArrival { request } => {
                write!(f, "request {request}: requests not sorted by arrival")
            }
            Violation::DuplicateArrival { request, other } => {
                write!(
                    f,
                    "request {request}: arrival timestep collides with request {other}"
                )
            }
            Violation::IdNotPosition { request, position } => {
                write!(
                    f,
                    "request {request}: id must equal its position {position}"
                )
            }
            Violation::ServerCountMismatch { k, positions } => {
                write!(f, "k = {k} but {positions} initial positions given")
            }
            Violation::BadParameter(what) => write!(f, "{what}"),
        }
    }
}

impl Instance {
    /// Travel time in time units between two nodes, rounded up.
    pub fn travel_time(&self, u: NodeId, v: NodeId) -> Time {
        self.travel_time_for(self.metric.dist(u, v) as f64)
    }

    /// Travel time for an arbitrary (possibly fractional) distance, rounded up.
    pub fn travel_time_for(&self, distance: f64) -> Time {
        if self.speed == 1.0 {
            return distance.ceil() as Time;
        }
        // Guard against 3.0000000001 becoming 4 through division noise.
        let t = distance / self.speed;
        let r = t.round();
        if (t - r).abs() < 1e-9 {
            r as Time
        } else {
            t.ceil() as Time
        }
    }

    pub fn dist(&self, u: NodeId, v: NodeId) -> Dist {
        self.metric.dist(u, v)
    }

    /// Distinct request sources, sorted.
    pub fn source_set(&self) -> Vec<NodeId> {
        self.requests
            .iter()
            .map(|r| r.source)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let m = self.metric.node_count();
        if self.k == 0 {
            out.push(Violation::BadParameter("k must be at least 1"));
        }
        if self.initial_positions.len() != self.k {
            out.push(Violation::ServerCountMismatch {
                k: self.k,
                positions: self.initial_positions.len(),
            });
        }
        for &p in &self.initial_positions {
            if p >= m {
                out.push(Violation::BadNode {
                    request: None,
                    node: p,
                    what: "initial position",
                });
            }
        }
        if self.eta < 1 {
            out.push(Violation::BadParameter("eta must be a positive integer"));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            out.push(Violation::BadParameter("speed must be positive"));
        }
        if self.horizon < 0 {
            out.push(Violation::BadParameter("horizon must be non-negative"));
        }
        let speed_ok = self.speed.is_finite() && self.speed > 0.0;
        let mut seen_arrivals: std::collections::HashMap<Time, usize> = Default::default();
        let mut prev: Option<Time> = None;
        for (position, r) in self.requests.iter().enumerate() {
            if r.id != position {
                out.push(Violation::IdNotPosition {
                    request: r.id,
                    position,
                });
            }
            let mut nodes_ok = true;
            for (node, what) in [(r.source, "source"), (r.dest, "destination")] {
                if node >= m {
                    nodes_ok = false;
                    out.push(Violation::BadNode {
                        request: Some(r.id),
                        node,
                        what,
                    });
                }
            }
            if r.t_end < r.t_begin {
                out.push(Violation::WindowInverted { request: r.id });
            }
            if r.t_begin < 0 {
                out.push(Violation::NegativeStart { request: r.id });
            }
            if nodes_ok && speed_ok {
                let delivered_at = r.t_end + self.travel_time(r.source, r.dest);
                if delivered_at > self.horizon {
                    out.push(Violation::ExceedsHorizon {
                        request: r.id,
                        delivered_at,
                    });
                }
            }
            if prev.is_some_and(|p| r.t_begin < p) {
                out.push(Violation::NotSortedByArrival { request: r.id });
            }
            prev = Some(r.t_begin);
            if let Some(&other) = seen_arrivals.get(&r.t_begin) {
                out.push(Violation::DuplicateArrival {
                    request: r.id,
                    other,
                });
            } else {
                seen_arrivals.insert(r.t_begin, r.id);
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::WeightedEdge;

    pub(crate) fn path_instance(requests: Vec<Request>) -> Instance {
        let metric = MetricSpace::new(
            3,
            vec![
                WeightedEdge { u: 0, v: 1, w: 2 },
                WeightedEdge { u: 1, v: 2, w: 3 },
            ],
        )
        .unwrap();
        Instance {
            metric,
            requests,
            k: 1,
            initial_positions: vec![0],
            eta: 1,
            horizon: 20,
            speed: 1.0,
        }
    }

    fn req(id: usize, s: NodeId, d: NodeId, b: Time, e: Time) -> Request {
        Request {
            id,
            source: s,
            dest: d,
            t_begin: b,
            t_end: e,
        }
    }

    #[test]
    fn well_formed_instance_is_ok() {
        let inst = path_instance(vec![req(0, 1, 2, 0, 5), req(1, 2, 0, 3, 6)]);
        assert_eq!(inst.validate(), Ok(()));
        assert_eq!(inst.source_set(), vec![1, 2]);
    }

    #[test]
    fn inverted_window_reported() {
        let inst = path_instance(vec![req(0, 1, 2, 5, 4)]);
        let v = inst.validate().unwrap_err();
        assert!(v.contains(&Violation::WindowInverted { request: 0 }));
        assert_eq!(v[0].to_string(), "request 0: window inverted");
    }

    #[test]
    fn horizon_overrun_reported() {
        let inst = path_instance(vec![req(0, 0, 2, 10, 18)]);
        let v = inst.validate().unwrap_err();
        assert_eq!(
            v,
            vec![Violation::ExceedsHorizon {
                request: 0,
                delivered_at: 23
            }]
        );
        assert!(v[0].to_string().contains("exceeds horizon"));
    }

    #[test]
    fn ordering_and_collisions_reported() {
        let inst = path_instance(vec![
            req(0, 1, 2, 4, 5),
            req(1, 1, 2, 4, 6),
            req(2, 1, 2, 1, 2),
        ]);
        let v = inst.validate().unwrap_err();
        assert!(v.contains(&Violation::DuplicateArrival {
            request: 1,
            other: 0
        }));
        assert!(v.contains(&Violation::NotSortedByArrival { request: 2 }));
    }

    #[test]
    fn travel_time_rounds_up() {
        let mut inst = path_instance(vec![]);
        assert_eq!(inst.travel_time(0, 2), 5);
        inst.speed = 2.0;
        assert_eq!(inst.travel_time(0, 2), 3);
        assert_eq!(inst.travel_time(0, 1), 1);
        inst.speed = 0.1;
        assert_eq!(inst.travel_time(0, 1), 20);
    }
}
