//! Virtual positions and the idle drift toward potential request sources.

use serde::{Deserialize, Serialize};

use crate::metric::{Dist, MetricSpace, NodeId};

/// A point of the metric graph: a node, or `offset` distance units from `u`
/// along the edge `(u, v)` of weight `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Node(NodeId),
    Edge {
        u: NodeId,
        v: NodeId,
        w: Dist,
        offset: f64,
    },
}

impl Position {
    pub fn node(&self) -> Option<NodeId> {
        match *self {
            Position::Node(n) => Some(n),
            Position::Edge { .. } => None,
        }
    }

    /// Shortest distance to node `x`, leaving a mid-edge point through
    /// whichever endpoint is closer.
    pub fn dist_to(&self, metric: &MetricSpace, x: NodeId) -> f64 {
        match *self {
            Position::Node(n) => metric.dist(n, x) as f64,
            Position::Edge { u, v, w, offset } => (offset + metric.dist(u, x) as f64)
                .min(w as f64 - offset + metric.dist(v, x) as f64),
        }
    }
}

/// Nearest node of a target set from every node, ties to the lowest id.
#[derive(Debug, Clone)]
pub struct NearestTarget {
    nearest: Vec<Option<(NodeId, Dist)>>,
}

impl NearestTarget {
    pub fn new(metric: &MetricSpace, targets: &[NodeId]) -> Self {
        let mut sorted = targets.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let nearest = (0..metric.node_count())
            .map(|a| {
                sorted
                    .iter()
                    .map(|&x| (metric.dist(a, x), x))
                    .min()
                    .map(|(d, x)| (x, d))
            })
            .collect();
        Self { nearest }
    }

    pub fn of_node(&self, a: NodeId) -> Option<(NodeId, Dist)> {
        self.nearest[a]
    }

    /// Nearest target from an arbitrary position and the exit endpoint to
    /// use (`None` when already standing on a node).
    pub fn of(&self, pos: &Position) -> Option<(NodeId, f64, Option<NodeId>)> {
        match *pos {
            Position::Node(a) => self.nearest[a].map(|(x, d)| (x, d as f64, None)),
            Position::Edge { u, v, w, offset } => {
                let via_u = self.nearest[u].map(|(x, d)| (offset + d as f64, x, u));
                let via_v = self.nearest[v].map(|(x, d)| (w as f64 - offset + d as f64, x, v));
                let best = match (via_u, via_v) {
                    (Some(a), Some(b)) => {
                        if (b.0, b.1) < (a.0, a.1) {
                            b
                        } else {
                            a
                        }
                    }
                    (a, b) => a.or(b)?,
                };
                Some((best.1, best.0, Some(best.2)))
            }
        }
    }

    pub fn distance(&self, pos: &Position) -> Option<f64> {
        self.of(pos).map(|(_, d, _)| d)
    }
}

/// Moves `pos` up to `budget` distance units along a shortest path toward
/// its nearest target. Positions on a target do not move.
pub fn virtual_step(
    metric: &MetricSpace,
    nearest: &NearestTarget,
    pos: Position,
    budget: f64,
) -> Position {
    let Some((target, _, exit)) = nearest.of(&pos) else {
        return pos;
    };
    let mut remaining = budget;
    let mut pos = pos;
    if let Position::Edge { u, v, w, offset } = pos {
        let exit = exit.expect("mid-edge positions always name an exit");
        let left = if exit == v { w as f64 - offset } else { offset };
        if remaining < left {
            let offset = if exit == v {
                offset + remaining
            } else {
                offset - remaining
            };
            return Position::Edge { u, v, w, offset };
        }
        remaining -= left;
        pos = Position::Node(exit);
    }
    let Position::Node(mut at) = pos else {
        unreachable!()
    };
    while at != target && remaining > 0.0 {
        let hop = metric.next_hop(at, target);
        let w = metric.dist(at, hop);
        if remaining < w as f64 {
            return Position::Edge {
                u: at,
                v: hop,
                w,
                offset: remaining,
            };
        }
        remaining -= w as f64;
        at = hop;
    }
    Position::Node(at)
}
