//! Discrete-time simulation of the online assignment policies.
//!
//! Each request is decided once, at its arrival time. A chosen server earns
//! the distance from its anchor to the source plus the trip itself and is
//! unavailable until delivery. Under Doc4Food idle servers also drift
//! virtually toward the nearest potential source; the virtual position
//! decides eligibility and pickup time while the anchor decides the reward.

mod drift;
mod policy;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Exec};
use crate::instance::{Instance, Request, Time};
use crate::metric::NodeId;

pub use drift::{virtual_step, NearestTarget, Position};
pub use policy::{
    policy_greedy_min, policy_min_delta, policy_random, policy_round_robin, random_weights, Policy,
};
pub use trace::{write_ndjson, EventKind, TraceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerState {
    pub id: usize,
    pub anchor: NodeId,
    pub virtual_pos: Position,
    /// First time the server is free again.
    pub busy_until: Time,
    pub reward: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub request: usize,
    /// `None` when no server was eligible.
    pub server: Option<usize>,
    pub assigned_at: Option<Time>,
    pub pickup: Option<Time>,
    pub delivery: Option<Time>,
    pub reward: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub policy: Policy,
    pub seed: u64,
    pub per_server: Vec<ServerState>,
    pub per_request: Vec<RequestRecord>,
    /// Idle-server eligibility checks where the virtual and the anchor
    /// position disagreed (Doc4Food only).
    pub divergences: usize,
    pub trace: Option<Vec<TraceEvent>>,
}

impl SimulationResult {
    pub fn rewards(&self) -> Vec<u64> {
        self.per_server.iter().map(|s| s.reward).collect()
    }

    pub fn unserved(&self) -> usize {
        self.per_request
            .iter()
            .filter(|r| r.server.is_none())
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    pub trace: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Servers free at `now` that can reach the request's source by its deadline
/// from `position(server)`.
pub fn eligible_servers(
    inst: &Instance,
    servers: &[ServerState],
    request: &Request,
    now: Time,
    position: impl Fn(&ServerState) -> Position,
) -> Vec<usize> {
    servers
        .iter()
        .filter(|s| {
            s.busy_until <= now && {
                let d = position(s).dist_to(&inst.metric, request.source);
                inst.travel_time_for(d) <= request.t_end - now
            }
        })
        .map(|s| s.id)
        .collect()
}

pub fn simulate(inst: &Instance, policy: Policy, seed: u64) -> Result<SimulationResult, SimError> {
    simulate_with(inst, policy, seed, SimOptions::default())
}

/// Runs every `(policy, seed)` pair, independently and in input order.
pub fn simulate_batch(
    inst: &Instance,
    runs: &[(Policy, u64)],
    opts: SimOptions,
    exec: Exec,
) -> Result<Vec<SimulationResult>, SimError> {
    exec::map(exec, runs, |&(p, s)| simulate_with(inst, p, s, opts))
        .into_iter()
        .collect()
}

struct Engine<'a> {
    inst: &'a Instance,
    policy: Policy,
    servers: Vec<ServerState>,
    nearest: Option<NearestTarget>,
    trace: Option<Vec<TraceEvent>>,
    next_drift: Time,
}

impl Engine<'_> {
    fn emit(
        &mut self,
        ts: Time,
        event: EventKind,
        request: Option<usize>,
        server: Option<usize>,
        position: Option<Position>,
        reward_delta: u64,
    ) {
        if let Some(t) = &mut self.trace {
            t.push(TraceEvent {
                ts,
                event,
                request,
                server,
                position,
                reward_delta,
            });
        }
    }

    /// Applies every drift step whose time is at most `until`. The step at
    /// time `t` moves servers that were already idle at `t - eta`.
    fn drift_until(&mut self, until: Time) {
        let Some(nearest) = self.nearest.take() else {
            return;
        };
        let eta = self.inst.eta;
        let budget = self.inst.speed * eta as f64;
        while self.next_drift <= until {
            let t = self.next_drift;
            for i in 0..self.servers.len() {
                let s = &self.servers[i];
                if s.busy_until > t - eta {
                    continue;
                }
                let moved = virtual_step(&self.inst.metric, &nearest, s.virtual_pos, budget);
                if moved != s.virtual_pos {
                    self.servers[i].virtual_pos = moved;
                    self.emit(t, EventKind::Drift, None, Some(i), Some(moved), 0);
                }
            }
            self.next_drift += eta;
        }
        self.nearest = Some(nearest);
    }
}

pub fn simulate_with(
    inst: &Instance,
    policy: Policy,
    seed: u64,
    opts: SimOptions,
) -> Result<SimulationResult, SimError> {
    if let Err(v) = inst.validate() {
        let msg = v
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(SimError::InvalidInstance(msg));
    }
    let k = inst.k;
    let servers = (0..k)
        .map(|i| {
            let p = inst.initial_positions[i];
            ServerState {
                id: i,
                anchor: p,
                virtual_pos: Position::Node(p),
                busy_until: 0,
                reward: 0,
            }
        })
        .collect();
    let nearest =
        (policy == Policy::Doc4Food).then(|| NearestTarget::new(&inst.metric, &inst.source_set()));
    let mut eng = Engine {
        inst,
        policy,
        servers,
        nearest,
        trace: opts.trace.then(Vec::new),
        next_drift: inst.eta,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cursor = 0usize;
    let mut divergences = 0usize;
    let mut records = Vec::with_capacity(inst.requests.len());

    for r in &inst.requests {
        let now = r.t_begin;
        eng.drift_until(now);
        eng.emit(
            now,
            EventKind::Arrive,
            Some(r.id),
            None,
            Some(Position::Node(r.source)),
            0,
        );

        let anchor_pos = |s: &ServerState| Position::Node(s.anchor);
        let eligible = if eng.policy == Policy::Doc4Food {
            let by_virtual = eligible_servers(inst, &eng.servers, r, now, |s| s.virtual_pos);
            let by_anchor = eligible_servers(inst, &eng.servers, r, now, anchor_pos);
            divergences += by_virtual.iter().filter(|i| !by_anchor.contains(i)).count();
            divergences += by_anchor.iter().filter(|i| !by_virtual.contains(i)).count();
            by_virtual
        } else {
            eligible_servers(inst, &eng.servers, r, now, anchor_pos)
        };
        if eligible.is_empty() {
            eng.emit(now, EventKind::Unserved, Some(r.id), None, None, 0);
            records.push(RequestRecord {
                request: r.id,
                server: None,
                assigned_at: None,
                pickup: None,
                delivery: None,
                reward: 0,
            });
            continue;
        }
        let rewards: Vec<u64> = eng.servers.iter().map(|s| s.reward).collect();
        let trip = inst.dist(r.source, r.dest);
        let chosen = match eng.policy {
            Policy::Random => policy_random(&eligible, &rewards, &mut rng),
            Policy::GreedyMin | Policy::Doc4Food => policy_greedy_min(&eligible, &rewards),
            Policy::MinDelta => policy_min_delta(&eligible, &rewards, |i| {
                inst.dist(eng.servers[i].anchor, r.source) + trip
            }),
            Policy::RoundRobin => {
                let (c, next) = policy_round_robin(&eligible, cursor, k);
                cursor = next;
                c
            }
        };

        let s = &eng.servers[chosen];
        let gained = inst.dist(s.anchor, r.source) + trip;
        let from = if eng.policy == Policy::Doc4Food {
            s.virtual_pos
        } else {
            Position::Node(s.anchor)
        };
        let travel = inst.travel_time_for(from.dist_to(&inst.metric, r.source));
        let pickup = (now + travel).max(r.t_begin).min(r.t_end);
        let delivery = pickup + inst.travel_time(r.source, r.dest);
        let s = &mut eng.servers[chosen];
        s.reward += gained;
        s.busy_until = delivery;
        s.anchor = r.dest;
        s.virtual_pos = Position::Node(r.dest);
        eng.emit(
            now,
            EventKind::Assign,
            Some(r.id),
            Some(chosen),
            Some(from),
            gained,
        );
        eng.emit(
            pickup,
            EventKind::Pickup,
            Some(r.id),
            Some(chosen),
            Some(Position::Node(r.source)),
            0,
        );
        eng.emit(
            delivery,
            EventKind::Deliver,
            Some(r.id),
            Some(chosen),
            Some(Position::Node(r.dest)),
            0,
        );
        records.push(RequestRecord {
            request: r.id,
            server: Some(chosen),
            assigned_at: Some(now),
            pickup: Some(pickup),
            delivery: Some(delivery),
            reward: gained,
        });
    }
    eng.drift_until(inst.horizon);

    let mut trace = eng.trace.take();
    if let Some(t) = &mut trace {
        t.sort_by_key(|e| e.ts);
    }
    Ok(SimulationResult {
        policy,
        seed,
        per_server: eng.servers,
        per_request: records,
        divergences,
        trace,
    })
}
