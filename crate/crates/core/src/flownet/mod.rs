//! Time-expanded flow network.
//!
//! Every location is copied once per timestep (`Grid` nodes). Each request gets
//! a dedicated `Pickup` node at its source and deadline; server routes are
//! unit flows from `Source` to `Sink`. Edges only ever go forward in time.

mod dot;

use std::fmt;

use thiserror::Error;

use crate::exec::{self, Exec};
use crate::instance::{Instance, Time};
use crate::metric::{Dist, NodeId};

pub type NodeIdx = usize;
pub type EdgeIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TENode {
    Source,
    Sink,
    Grid {
        location: NodeId,
        time: Time,
    },
    Pickup {
        request: usize,
        location: NodeId,
        time: Time,
    },
}

impl TENode {
    /// Timestep of the node; `Source` sorts before and `Sink` after all others.
    pub fn time(&self) -> Time {
        match *self {
            TENode::Source => Time::MIN,
            TENode::Sink => Time::MAX,
            TENode::Grid { time, .. } | TENode::Pickup { time, .. } => time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    SourceLink,
    SinkLink,
    /// Waiting at a location for one timestep.
    Stay,
    Approach,
    Delivery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TEEdge {
    pub from: NodeIdx,
    pub to: NodeIdx,
    pub cost: Dist,
    pub kind: EdgeKind,
    pub request: Option<usize>,
}

/// How travel times that are not multiples of the timestep are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TravelRounding {
    /// Reject the instance.
    #[default]
    Strict,
    /// Round up to the next timestep, so the network never arrives early.
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NetworkOptions {
    pub rounding: TravelRounding,
    pub exec: Exec,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("travel time {travel} from {from} to {to} is not a multiple of eta = {eta}")]
    NonIntegralTravelTime {
        from: NodeId,
        to: NodeId,
        travel: Time,
        eta: Time,
    },
    #[error("request {request}: time {time} is not on the timestep grid")]
    OffGridTime { request: usize, time: Time },
    #[error("horizon {horizon} is not a non-negative multiple of eta = {eta}")]
    BadHorizon { horizon: Time, eta: Time },
    #[error("request {request}: delivery at {time} lands past the horizon {horizon}")]
    HorizonOverflow {
        request: usize,
        time: Time,
        horizon: Time,
    },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

pub struct TimeExpandedNetwork<'a> {
    pub instance: &'a Instance,
    pub nodes: Vec<TENode>,
    pub edges: Vec<TEEdge>,
    steps: usize,
    out_start: Vec<usize>,
    out_list: Vec<EdgeIdx>,
    in_start: Vec<usize>,
    in_list: Vec<EdgeIdx>,
    delivery_edge: Vec<EdgeIdx>,
}

pub const SOURCE: NodeIdx = 0;
pub const SINK: NodeIdx = 1;

impl<'a> TimeExpandedNetwork<'a> {
    pub fn location_count(&self) -> usize {
        self.instance.metric.node_count()
    }

    /// Number of grid layers, `T/eta + 1`.
    pub fn layers(&self) -> usize {
        self.steps + 1
    }

    pub fn grid(&self, location: NodeId, time: Time) -> Option<NodeIdx> {
        let eta = self.instance.eta;
        if time < 0 || time % eta != 0 || location >= self.location_count() {
            return None;
        }
        let step = (time / eta) as usize;
        (step <= self.steps).then(|| 2 + step * self.location_count() + location)
    }

    pub fn pickup(&self, request: usize) -> NodeIdx {
        2 + self.layers() * self.location_count() + request
    }

    pub fn delivery_edge(&self, request: usize) -> EdgeIdx {
        self.delivery_edge[request]
    }

    pub fn out_edges(&self, node: NodeIdx) -> &[EdgeIdx] {
        &self.out_list[self.out_start[node]..self.out_start[node + 1]]
    }

    pub fn in_edges(&self, node: NodeIdx) -> &[EdgeIdx] {
        &self.in_list[self.in_start[node]..self.in_start[node + 1]]
    }

    /// Recomputes the adjacency index after `nodes` or `edges` were edited.
    pub fn reindex(&mut self) {
        let n = self.nodes.len();
        let (out_start, out_list) = csr(n, self.edges.iter().map(|e| e.from));
        let (in_start, in_list) = csr(n, self.edges.iter().map(|e| e.to));
        self.out_start = out_start;
        self.out_list = out_list;
        self.in_start = in_start;
        self.in_list = in_list;
        let requests = self.instance.requests.len();
        self.delivery_edge = vec![usize::MAX; requests];
        for (i, e) in self.edges.iter().enumerate() {
            if let (EdgeKind::Delivery, Some(r)) = (e.kind, e.request) {
                if r < requests {
                    self.delivery_edge[r] = i;
                }
            }
        }
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}

fn csr(n: usize, keys: impl Iterator<Item = NodeIdx> + Clone) -> (Vec<usize>, Vec<EdgeIdx>) {
    let mut start = vec![0usize; n + 1];
    for k in keys.clone() {
        start[k + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut list = vec![0; start[n]];
    for (edge, k) in keys.enumerate() {
        list[fill[k]] = edge;
        fill[k] += 1;
    }
    (start, list)
}

/// Quantised travel time between two nodes, in time units.
fn quantised_travel(
    instance: &Instance,
    rounding: TravelRounding,
    from: NodeId,
    to: NodeId,
) -> Result<Time, NetworkError> {
    let eta = instance.eta;
    let travel = instance.travel_time(from, to);
    if travel % eta == 0 {
        return Ok(travel);
    }
    match rounding {
        TravelRounding::Strict => Err(NetworkError::NonIntegralTravelTime {
            from,
            to,
            travel,
            eta,
        }),
        TravelRounding::Ceil => Ok((travel + eta - 1) / eta * eta),
    }
}

/// Time at which a delivery edge lands. Zero-length trips still occupy one
/// timestep so that no zero-time cycle can form through the pickup node.
pub fn delivery_landing(t_end: Time, travel: Time, eta: Time) -> Time {
    t_end + travel.max(eta)
}

pub fn build_network(instance: &Instance) -> Result<TimeExpandedNetwork<'_>, NetworkError> {
    build_network_with(instance, NetworkOptions::default())
}

pub fn build_network_with(
    instance: &Instance,
    opts: NetworkOptions,
) -> Result<TimeExpandedNetwork<'_>, NetworkError> {
    if let Err(v) = instance.validate() {
        let msg = v
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(NetworkError::InvalidInstance(msg));
    }
    let eta = instance.eta;
    let horizon = instance.horizon;
    if horizon % eta != 0 {
        return Err(NetworkError::BadHorizon { horizon, eta });
    }
    for r in &instance.requests {
        for time in [r.t_begin, r.t_end] {
            if time % eta != 0 {
                return Err(NetworkError::OffGridTime {
                    request: r.id,
                    time,
                });
            }
        }
    }

    let m = instance.metric.node_count();
    let steps = (horizon / eta) as usize;
    let n = instance.requests.len();

    let mut nodes = Vec::with_capacity(2 + m * (steps + 1) + n);
    nodes.push(TENode::Source);
    nodes.push(TENode::Sink);
    for step in 0..=steps {
        for location in 0..m {
            nodes.push(TENode::Grid {
                location,
                time: step as Time * eta,
            });
        }
    }
    for r in &instance.requests {
        nodes.push(TENode::Pickup {
            request: r.id,
            location: r.source,
            time: r.t_end,
        });
    }
    let grid = |location: NodeId, time: Time| 2 + (time / eta) as usize * m + location;
    let pickup = |request: usize| 2 + (steps + 1) * m + request;

    let mut edges = Vec::with_capacity(2 * m + steps * m + n * (m + 1));
    for location in 0..m {
        edges.push(TEEdge {
            from: SOURCE,
            to: grid(location, 0),
            cost: 0,
            kind: EdgeKind::SourceLink,
            request: None,
        });
    }
    for step in 0..steps {
        let t = step as Time * eta;
        for location in 0..m {
            edges.push(TEEdge {
                from: grid(location, t),
                to: grid(location, t + eta),
                cost: 0,
                kind: EdgeKind::Stay,
                request: None,
            });
        }
    }

    let per_request = exec::map(opts.exec, &instance.requests, |r| {
        let mut out = Vec::with_capacity(m + 1);
        for origin in 0..m {
            if origin == r.source {
                out.push(TEEdge {
                    from: grid(origin, r.t_end),
                    to: pickup(r.id),
                    cost: 0,
                    kind: EdgeKind::Approach,
                    request: Some(r.id),
                });
                continue;
            }
            let travel = quantised_travel(instance, opts.rounding, origin, r.source)?;
            if travel <= r.window() {
                out.push(TEEdge {
                    from: grid(origin, r.t_end - travel),
                    to: pickup(r.id),
                    cost: instance.dist(origin, r.source),
                    kind: EdgeKind::Approach,
                    request: Some(r.id),
                });
            }
        }
        let travel = quantised_travel(instance, opts.rounding, r.source, r.dest)?;
        let landing = delivery_landing(r.t_end, travel, eta);
        if landing > horizon {
            return Err(NetworkError::HorizonOverflow {
                request: r.id,
                time: landing,
                horizon,
            });
        }
        out.push(TEEdge {
            from: pickup(r.id),
            to: grid(r.dest, landing),
            cost: instance.dist(r.source, r.dest),
            kind: EdgeKind::Delivery,
            request: Some(r.id),
        });
        Ok(out)
    });
    for chunk in per_request {
        edges.extend(chunk?);
    }
    for location in 0..m {
        edges.push(TEEdge {
            from: grid(location, horizon),
            to: SINK,
            cost: 0,
            kind: EdgeKind::SinkLink,
            request: None,
        });
    }

    let mut net = TimeExpandedNetwork {
        instance,
        nodes,
        edges,
        steps,
        out_start: Vec::new(),
        out_list: Vec::new(),
        in_start: Vec::new(),
        in_list: Vec::new(),
        delivery_edge: Vec::new(),
    };
    net.reindex();
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetViolation {
    SourceSinkCount { sources: usize, sinks: usize },
    MissingGrid { location: NodeId, time: Time },
    PickupCount { request: usize, found: usize },
    PickupMisplaced { request: usize },
    NonZeroCost { edge: EdgeIdx },
    BadApproach { edge: EdgeIdx, reason: &'static str },
    BadDelivery { edge: EdgeIdx, reason: &'static str },
    BackwardInTime { edge: EdgeIdx },
    DeliveryCount { request: usize, found: usize },
    DuplicateApproach { request: usize, origin: NodeId },
    BadEndpoint { edge: EdgeIdx },
    SizeBound { nodes: usize, bound: usize },
}

impl fmt::Display for NetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Checks every structural invariant of a network against its instance.
pub fn validate_network(net: &TimeExpandedNetwork<'_>) -> Result<(), Vec<NetViolation>> {
    let inst = net.instance;
    let m = net.location_count();
    let n = inst.requests.len();
    let eta = inst.eta;
    let mut out = Vec::new();

    let sources = net
        .nodes
        .iter()
        .filter(|x| matches!(x, TENode::Source))
        .count();
    let sinks = net
        .nodes
        .iter()
        .filter(|x| matches!(x, TENode::Sink))
        .count();
    if sources != 1 || sinks != 1 {
        out.push(NetViolation::SourceSinkCount { sources, sinks });
    }
    let mut have_grid = vec![false; m * net.layers()];
    let mut pickups = vec![0usize; n];
    for node in &net.nodes {
        match *node {
            TENode::Grid { location, time } if location < m && time % eta == 0 && time >= 0 => {
                let step = (time / eta) as usize;
                if step < net.layers() {
                    have_grid[step * m + location] = true;
                }
            }
            TENode::Pickup {
                request,
                location,
                time,
            } if request < n => {
                pickups[request] += 1;
                let r = &inst.requests[request];
                if location != r.source || time != r.t_end {
                    out.push(NetViolation::PickupMisplaced { request });
                }
            }
            _ => {}
        }
    }
    for (i, ok) in have_grid.iter().enumerate() {
        if !ok {
            out.push(NetViolation::MissingGrid {
                location: i % m,
                time: (i / m) as Time * eta,
            });
        }
    }
    for (request, &found) in pickups.iter().enumerate() {
        if found != 1 {
            out.push(NetViolation::PickupCount { request, found });
        }
    }

    let mut deliveries = vec![0usize; n];
    let mut seen_approach = std::collections::HashSet::new();
    for (idx, e) in net.edges.iter().enumerate() {
        let (Some(from), Some(to)) = (net.nodes.get(e.from), net.nodes.get(e.to)) else {
            out.push(NetViolation::BadEndpoint { edge: idx });
            continue;
        };
        if to.time() < from.time() {
            out.push(NetViolation::BackwardInTime { edge: idx });
        }
        match e.kind {
            EdgeKind::SourceLink | EdgeKind::SinkLink | EdgeKind::Stay => {
                if e.cost != 0 {
                    out.push(NetViolation::NonZeroCost { edge: idx });
                }
            }
            EdgeKind::Approach => {
                let bad = |reason| NetViolation::BadApproach { edge: idx, reason };
                let (
                    Some(j),
                    TENode::Grid {
                        location: origin,
                        time: depart,
                    },
                    TENode::Pickup { request, .. },
                ) = (e.request, *from, *to)
                else {
                    out.push(bad(
                        "approach must join a grid node to its request's pickup",
                    ));
                    continue;
                };
                if j != request || j >= n {
                    out.push(bad("request id mismatch"));
                    continue;
                }
                let r = &inst.requests[j];
                if e.cost != inst.dist(origin, r.source) {
                    out.push(bad("cost differs from the shortest-path distance"));
                }
                let travel = depart_travel(inst, origin, r.source);
                if origin != r.source && depart + travel != r.t_end {
                    out.push(bad("does not arrive exactly at the deadline"));
                }
                if origin == r.source && depart != r.t_end {
                    out.push(bad("co-located approach must leave at the deadline"));
                }
                if depart < r.t_begin || depart > r.t_end {
                    out.push(bad("departure outside the pickup window"));
                }
                if !seen_approach.insert((j, origin)) {
                    out.push(NetViolation::DuplicateApproach { request: j, origin });
                }
            }
            EdgeKind::Delivery => {
                let bad = |reason| NetViolation::BadDelivery { edge: idx, reason };
                let (Some(j), TENode::Pickup { request, .. }, TENode::Grid { location, time }) =
                    (e.request, *from, *to)
                else {
                    out.push(bad("delivery must join a pickup to a grid node"));
                    continue;
                };
                if j != request || j >= n {
                    out.push(bad("request id mismatch"));
                    continue;
                }
                deliveries[j] += 1;
                let r = &inst.requests[j];
                if location != r.dest {
                    out.push(bad("does not land at the destination"));
                }
                if e.cost != inst.dist(r.source, r.dest) {
                    out.push(bad("cost differs from the source-destination distance"));
                }
                let landing = delivery_landing(r.t_end, depart_travel(inst, r.source, r.dest), eta);
                if time != landing {
                    out.push(bad("lands at the wrong timestep"));
                }
            }
        }
    }
    for (request, &found) in deliveries.iter().enumerate() {
        if found != 1 {
            out.push(NetViolation::DeliveryCount { request, found });
        }
    }
    let bound = m * net.layers() + n + 2;
    if net.nodes.len() > bound {
        out.push(NetViolation::SizeBound {
            nodes: net.nodes.len(),
            bound,
        });
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Travel time as the builder would have used it, tolerating either rounding.
fn depart_travel(inst: &Instance, from: NodeId, to: NodeId) -> Time {
    let t = inst.travel_time(from, to);
    (t + inst.eta - 1) / inst.eta * inst.eta
}
