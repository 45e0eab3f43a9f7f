//! Exhaustive reference solver for tiny instances.
//!
//! Every map from requests to servers or "unserved" is tried, and for each
//! server every service order of its requests. Servers do not interact, so a
//! per-server table over request subsets is built once and the assignment
//! enumeration only combines table entries.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::exec::{self, Exec};
use crate::instance::{Instance, Time};
use crate::metric::NodeId;

pub const ORACLE_MAX_REQUESTS: usize = 8;
pub const ORACLE_MAX_SERVERS: usize = 3;

/// When a server leaves for a request and when it picks it up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleTiming {
    /// Leave as late as possible and pick up exactly at the deadline; the
    /// trip must fit inside the pickup window. Matches the time-expanded
    /// network edge for edge.
    #[default]
    Critical,
    /// Leave as soon as free and pick up at `max(arrival, t_begin)`.
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleOptions {
    pub timing: OracleTiming,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// Largest minimum reward among assignments with the fewest unserved.
    pub best_maxmin: u64,
    pub maxmin_unserved: usize,
    /// `best_assignment[j]` is the server of request `j`, `None` if unserved.
    pub best_assignment: Vec<Option<usize>>,
    /// Smallest total cost among assignments with the fewest unserved.
    pub best_mincost: u64,
    pub mincost_unserved: usize,
    pub mincost_assignment: Vec<Option<usize>>,
    /// Some optimal assignment lets every server earn exactly `best_maxmin`.
    pub equal_split: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle limited to {max_n} requests and {max_k} servers, got {n} and {k}")]
    GuardRailExceeded {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

#[derive(Debug, Clone, Default)]
struct Reach {
    max: u64,
    min: u64,
    values: BTreeSet<u64>,
}

pub fn brute_force_oracle(inst: &Instance) -> Result<OracleResult, OracleError> {
    brute_force_oracle_with(inst, OracleOptions::default())
}

pub fn brute_force_oracle_with(
    inst: &Instance,
    opts: OracleOptions,
) -> Result<OracleResult, OracleError> {
    let n = inst.requests.len();
    let k = inst.k;
    if n > ORACLE_MAX_REQUESTS || k > ORACLE_MAX_SERVERS {
        return Err(OracleError::GuardRailExceeded {
            n,
            k,
            max_n: ORACLE_MAX_REQUESTS,
            max_k: ORACLE_MAX_SERVERS,
        });
    }
    if let Err(v) = inst.validate() {
        let msg = v
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(OracleError::InvalidInstance(msg));
    }

    let tables: Vec<Vec<Option<Reach>>> =
        (0..k).map(|i| server_table(inst, i, opts.timing)).collect();

    let total = (k + 1).pow(n as u32);
    let chunk = 4096usize;
    let chunks = total.div_ceil(chunk);
    let partial = exec::map_range(opts.exec, chunks, |c| {
        let mut best = Best::default();
        for code in c * chunk..((c + 1) * chunk).min(total) {
            if let Some(eval) = evaluate(&tables, code, n, k) {
                best.offer(code, &eval);
            }
        }
        best
    });
    let mut best = Best::default();
    for p in partial {
        best.merge(p);
    }
    // the all-unserved assignment is always feasible
    let (u_max, m_max, code_max) = best.maxmin.expect("empty assignment is feasible");
    let (u_min, c_min, code_min) = best.mincost.expect("empty assignment is feasible");

    let equal_split = exec::map_range(opts.exec, chunks, |c| {
        (c * chunk..((c + 1) * chunk).min(total)).any(|code| {
            let masks = masks_of(code, n, k);
            let unserved = n - masks.iter().map(|m| m.count_ones() as usize).sum::<usize>();
            unserved == u_max
                && masks.iter().enumerate().all(|(i, &mask)| {
                    tables[i][mask]
                        .as_ref()
                        .is_some_and(|r| r.values.contains(&m_max))
                })
        })
    })
    .into_iter()
    .any(|x| x);

    Ok(OracleResult {
        best_maxmin: m_max,
        maxmin_unserved: u_max,
        best_assignment: decode(code_max, n, k),
        best_mincost: c_min,
        mincost_unserved: u_min,
        mincost_assignment: decode(code_min, n, k),
        equal_split,
    })
}

struct Eval {
    unserved: usize,
    maxmin: u64,
    mincost: u64,
}

#[derive(Default)]
struct Best {
    maxmin: Option<(usize, u64, usize)>,
    mincost: Option<(usize, u64, usize)>,
}

impl Best {
    fn offer(&mut self, code: usize, e: &Eval) {
        let mm = (e.unserved, e.maxmin, code);
        if self.maxmin.is_none_or(|b| better_maxmin(mm, b)) {
            self.maxmin = Some(mm);
        }
        let mc = (e.unserved, e.mincost, code);
        if self.mincost.is_none_or(|b| better_mincost(mc, b)) {
            self.mincost = Some(mc);
        }
    }

    fn merge(&mut self, other: Best) {
        if let Some(o) = other.maxmin {
            if self.maxmin.is_none_or(|b| better_maxmin(o, b)) {
                self.maxmin = Some(o);
            }
        }
        if let Some(o) = other.mincost {
            if self.mincost.is_none_or(|b| better_mincost(o, b)) {
                self.mincost = Some(o);
            }
        }
    }
}

fn better_maxmin(a: (usize, u64, usize), b: (usize, u64, usize)) -> bool {
    (a.0, std::cmp::Reverse(a.1), a.2) < (b.0, std::cmp::Reverse(b.1), b.2)
}

fn better_mincost(a: (usize, u64, usize), b: (usize, u64, usize)) -> bool {
    a < b
}

fn masks_of(mut code: usize, n: usize, k: usize) -> Vec<usize> {
    let mut masks = vec![0usize; k];
    for j in 0..n {
        let digit = code % (k + 1);
        code /= k + 1;
        if digit < k {
            masks[digit] |= 1 << j;
        }
    }
    masks
}

fn decode(mut code: usize, n: usize, k: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|_| {
            let digit = code % (k + 1);
            code /= k + 1;
            (digit < k).then_some(digit)
        })
        .collect()
}

fn evaluate(tables: &[Vec<Option<Reach>>], code: usize, n: usize, k: usize) -> Option<Eval> {
    let masks = masks_of(code, n, k);
    let mut maxmin = u64::MAX;
    let mut mincost = 0u64;
    let mut served = 0usize;
    for (i, &mask) in masks.iter().enumerate() {
        let reach = tables[i][mask].as_ref()?;
        maxmin = maxmin.min(reach.max);
        mincost += reach.min;
        served += mask.count_ones() as usize;
    }
    if k == 0 {
        maxmin = 0;
    }
    Some(Eval {
        unserved: n - served,
        maxmin,
        mincost,
    })
}

/// Travel time rounded up onto the timestep grid.
fn grid_travel(inst: &Instance, u: NodeId, v: NodeId) -> Time {
    let t = inst.travel_time(u, v);
    (t + inst.eta - 1) / inst.eta * inst.eta
}

/// Rewards reachable by server `i` for every subset of requests it serves.
fn server_table(inst: &Instance, i: usize, timing: OracleTiming) -> Vec<Option<Reach>> {
    let n = inst.requests.len();
    let mut table: Vec<Option<Reach>> = vec![None; 1 << n];
    let start = inst.initial_positions[i];
    dfs(inst, timing, &mut table, start, 0, 0, 0);
    table
}

fn dfs(
    inst: &Instance,
    timing: OracleTiming,
    table: &mut [Option<Reach>],
    pos: NodeId,
    free: Time,
    mask: usize,
    reward: u64,
) {
    let entry = table[mask].get_or_insert_with(|| Reach {
        max: reward,
        min: reward,
        values: BTreeSet::new(),
    });
    entry.max = entry.max.max(reward);
    entry.min = entry.min.min(reward);
    entry.values.insert(reward);

    for (j, r) in inst.requests.iter().enumerate() {
        if mask & (1 << j) != 0 {
            continue;
        }
        let approach = grid_travel(inst, pos, r.source);
        let delivery = grid_travel(inst, r.source, r.dest);
        let next_free = match timing {
            OracleTiming::Critical => {
                let feasible = if pos == r.source {
                    free <= r.t_end
                } else {
                    approach <= r.window() && r.t_end - approach >= free
                };
                if !feasible {
                    continue;
                }
                r.t_end + delivery.max(inst.eta)
            }
            OracleTiming::Eager => {
                let pickup = (free + approach).max(r.t_begin);
                if pickup > r.t_end {
                    continue;
                }
                pickup + delivery
            }
        };
        let gained = inst.dist(pos, r.source) + inst.dist(r.source, r.dest);
        dfs(
            inst,
            timing,
            table,
            r.dest,
            next_free,
            mask | (1 << j),
            reward + gained,
        );
    }
}
