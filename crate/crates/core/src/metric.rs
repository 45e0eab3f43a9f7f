//! Finite metric spaces realised as weighted connected graphs.
//!
//! Distances are exact integers. All-pairs shortest paths are computed once at
//! construction; afterwards a [`MetricSpace`] is immutable and can be shared
//! freely between threads.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::ops::RangeInclusive;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Exec};

pub type NodeId = usize;
/// Distance in integer distance units.
pub type Dist = u64;

const UNREACHABLE: Dist = Dist::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("graph is disconnected: node {unreachable} cannot be reached from node 0")]
    DisconnectedGraph { unreachable: NodeId },
    #[error("invalid edge #{index} ({u}, {v}, {w}): {reason}")]
    InvalidEdge {
        index: usize,
        u: NodeId,
        v: NodeId,
        w: Dist,
        reason: &'static str,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("node id {0} out of range")]
    NodeOutOfRange(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: Dist,
}

/// On-disk graph description: `{"nodes": m, "edges": [[u, v, w], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: usize,
    pub edges: Vec<(NodeId, NodeId, Dist)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSpace {
    node_count: usize,
    edges: Vec<WeightedEdge>,
    dist: Vec<Dist>,
    next_hop: Vec<u32>,
}

impl MetricSpace {
    /// Builds the shortest-path closure of an undirected weighted graph.
    pub fn new(node_count: usize, edges: Vec<WeightedEdge>) -> Result<Self, MetricError> {
        Self::with_exec(node_count, edges, Exec::default())
    }

    pub fn with_exec(
        node_count: usize,
        edges: Vec<WeightedEdge>,
        exec: Exec,
    ) -> Result<Self, MetricError> {
        if node_count == 0 {
            return Err(MetricError::EmptyInput(
                "metric space needs at least one node",
            ));
        }
        for (index, e) in edges.iter().enumerate() {
            let bad = |reason| MetricError::InvalidEdge {
                index,
                u: e.u,
                v: e.v,
                w: e.w,
                reason,
            };
            if e.u >= node_count || e.v >= node_count {
                return Err(bad("endpoint out of range"));
            }
            if e.w == 0 {
                return Err(bad("weight must be positive"));
            }
            if e.u == e.v {
                return Err(bad("self loop"));
            }
        }

        let mut adj: Vec<Vec<(NodeId, Dist)>> = vec![Vec::new(); node_count];
        for e in &edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        for list in &mut adj {
            list.sort_unstable();
        }

        let dense = {
            let n = node_count as f64;
            (2 * edges.len()) as f64 * n.log2().max(1.0) > n * n
        };
        let rows = exec::map_range(exec, node_count, |src| {
            if dense {
                dijkstra_dense(&adj, src)
            } else {
                dijkstra_heap(&adj, src)
            }
        });

        let mut dist = Vec::with_capacity(node_count * node_count);
        let mut next_hop = Vec::with_capacity(node_count * node_count);
        for (d, h) in rows {
            if let Some(unreachable) = d.iter().position(|&x| x == UNREACHABLE) {
                return Err(MetricError::DisconnectedGraph { unreachable });
            }
            dist.extend_from_slice(&d);
            next_hop.extend_from_slice(&h);
        }
        Ok(Self {
            node_count,
            edges,
            dist,
            next_hop,
        })
    }

    pub fn from_graph_file(graph: &GraphFile) -> Result<Self, MetricError> {
        let edges = graph
            .edges
            .iter()
            .map(|&(u, v, w)| WeightedEdge { u, v, w })
            .collect();
        Self::new(graph.nodes, edges)
    }

    pub fn to_graph_file(&self) -> GraphFile {
        GraphFile {
            nodes: self.node_count,
            edges: self.edges.iter().map(|e| (e.u, e.v, e.w)).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    #[inline]
    pub fn dist(&self, u: NodeId, v: NodeId) -> Dist {
        self.dist[u * self.node_count + v]
    }

    /// First node after `u` on the shortest path from `u` to `v` (`v` itself
    /// when `u == v`).
    #[inline]
    pub fn next_hop(&self, u: NodeId, v: NodeId) -> NodeId {
        self.next_hop[u * self.node_count + v] as NodeId
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u < self.node_count
    }

    /// Shortest path from `u` to `v` as its length and node sequence.
    pub fn shortest_path(&self, u: NodeId, v: NodeId) -> Result<(Dist, Vec<NodeId>), MetricError> {
        for x in [u, v] {
            if !self.contains(x) {
                return Err(MetricError::NodeOutOfRange(x));
            }
        }
        let mut path = vec![u];
        let mut at = u;
        while at != v {
            at = self.next_hop(at, v);
            path.push(at);
        }
        Ok((self.dist(u, v), path))
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> Dist {
        self.dist.iter().copied().max().unwrap_or(0)
    }
}

fn dijkstra_heap(adj: &[Vec<(NodeId, Dist)>], src: NodeId) -> (Vec<Dist>, Vec<u32>) {
    let n = adj.len();
    let mut dist = vec![UNREACHABLE; n];
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0;
    heap.push(Reverse((0, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        order.push(u);
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] || (nd == dist[v] && !done[v] && u < parent[v]) {
                dist[v] = nd;
                parent[v] = u;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    (dist, hops_from_parents(src, &parent, &order))
}

fn dijkstra_dense(adj: &[Vec<(NodeId, Dist)>], src: NodeId) -> (Vec<Dist>, Vec<u32>) {
    let n = adj.len();
    let mut dist = vec![UNREACHABLE; n];
    let mut parent = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    dist[src] = 0;
    loop {
        let mut best = None;
        for v in 0..n {
            if !done[v] && dist[v] != UNREACHABLE && best.is_none_or(|b: usize| dist[v] < dist[b]) {
                best = Some(v);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        order.push(u);
        let d = dist[u];
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] || (nd == dist[v] && !done[v] && u < parent[v]) {
                dist[v] = nd;
                parent[v] = u;
            }
        }
    }
    (dist, hops_from_parents(src, &parent, &order))
}

/// Next-hop row for `src` from a shortest-path tree, visiting nodes in settle
/// order so a node's parent is always resolved before the node.
fn hops_from_parents(src: NodeId, parent: &[NodeId], order: &[NodeId]) -> Vec<u32> {
    let mut hop = vec![u32::MAX; parent.len()];
    hop[src] = src as u32;
    for &v in order.iter().skip(1) {
        let p = parent[v];
        hop[v] = if p == src { v as u32 } else { hop[p] };
    }
    hop
}

/// Erdős–Rényi graph on `n` nodes with integer weights drawn uniformly from
/// `weights`. Disconnected samples are patched by repeatedly joining two
/// distinct components with one random edge.
pub fn gen_erdos_renyi(
    n: usize,
    p: f64,
    weights: RangeInclusive<Dist>,
    seed: u64,
) -> Result<MetricSpace, MetricError> {
    gen_erdos_renyi_with(n, p, weights, seed, Exec::default())
}

pub fn gen_erdos_renyi_with(
    n: usize,
    p: f64,
    weights: RangeInclusive<Dist>,
    seed: u64,
    exec: Exec,
) -> Result<MetricSpace, MetricError> {
    if n == 0 {
        return Err(MetricError::EmptyInput("graph needs at least one node"));
    }
    if weights.is_empty() || *weights.start() == 0 {
        return Err(MetricError::EmptyInput(
            "weight range must be non-empty and positive",
        ));
    }
    let p = p.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut uf = UnionFind::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                edges.push(WeightedEdge {
                    u,
                    v,
                    w: rng.gen_range(weights.clone()),
                });
                uf.union(u, v);
            }
        }
    }
    while uf.components > 1 {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if uf.find(u) != uf.find(v) {
            edges.push(WeightedEdge {
                u: u.min(v),
                v: u.max(v),
                w: rng.gen_range(weights.clone()),
            });
            uf.union(u, v);
        }
    }
    MetricSpace::with_exec(n, edges, exec)
}

/// Star metric: node 0 is the centre, node `j` sits at distance
/// `leaf_distances[j - 1]` from it.
pub fn gen_star(leaf_distances: &[Dist]) -> Result<MetricSpace, MetricError> {
    if leaf_distances.is_empty() {
        return Err(MetricError::EmptyInput("star needs at least one leaf"));
    }
    let edges = leaf_distances
        .iter()
        .enumerate()
        .map(|(j, &w)| WeightedEdge { u: 0, v: j + 1, w })
        .collect();
    MetricSpace::new(leaf_distances.len() + 1, edges)
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
            self.components -= 1;
        }
    }
}
