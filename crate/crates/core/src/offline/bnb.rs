//! Branch-and-bound over the binary variables of a [`MilpModel`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::model::{MilpModel, Sense};
use super::simplex::{solve_lp, LpStatus, SimplexError};
use super::{Solution, SolveStatus};

/// Largest model the embedded solver accepts; bigger ones should be exported.
pub const MAX_EMBEDDED_VARIABLES: usize = 50_000;
/// Dense tableau cells (rows times columns including slacks) allowed.
pub const MAX_TABLEAU_CELLS: usize = 40_000_000;

const INTEGRALITY_TOL: f64 = 1e-6;
const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveLimits {
    pub max_nodes: usize,
    pub time: Duration,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_nodes: 10_000,
            time: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("model too large for the embedded solver ({variables} variables, {rows} rows); export it and use an external solver")]
    ModelTooLarge { variables: usize, rows: usize },
    #[error("limits must be positive")]
    InvalidLimits,
    #[error("limits reached after {nodes} nodes without an integral solution")]
    NoIncumbent { nodes: usize },
    #[error(transparent)]
    Numerical(#[from] SimplexError),
}

struct Node {
    bound: f64,
    seq: u64,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // best bound first (smallest internal minimisation value), then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

pub fn solve_embedded(model: &MilpModel, limits: SolveLimits) -> Result<Solution, SolveError> {
    solve_embedded_with_stats(model, limits).map(|(s, _)| s)
}

pub fn solve_embedded_with_stats(
    model: &MilpModel,
    limits: SolveLimits,
) -> Result<(Solution, SolveStats), SolveError> {
    if limits.max_nodes == 0 || limits.time.is_zero() {
        return Err(SolveError::InvalidLimits);
    }
    let nv = model.var_count();
    let nr = model.row_count();
    if nv > MAX_EMBEDDED_VARIABLES || nr.saturating_mul(nv + 2 * nr) > MAX_TABLEAU_CELLS {
        return Err(SolveError::ModelTooLarge {
            variables: nv,
            rows: nr,
        });
    }
    let start = Instant::now();
    let sign = match model.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    let cost: Vec<f64> = model.vars.iter().map(|v| sign * v.obj).collect();
    let base_lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();

    let mut stats = SolveStats::default();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fixings: Vec::new(),
    });
    let mut limited = false;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if prunable(node.bound, *best) {
                continue;
            }
        }
        if stats.nodes >= limits.max_nodes || start.elapsed() >= limits.time {
            limited = true;
            break;
        }
        stats.nodes += 1;
        let mut lower = base_lower.clone();
        let mut upper = base_upper.clone();
        for &(v, value) in &node.fixings {
            lower[v] = value;
            upper[v] = value;
        }
        let lp = solve_lp(&model.rows, &cost, &lower, &upper)?;
        stats.lp_iterations += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(SimplexError::NumericalFailure("relaxation is unbounded".into()).into())
            }
            LpStatus::Optimal => {}
        }
        if let Some((best, _)) = &incumbent {
            if prunable(lp.objective, *best) {
                continue;
            }
        }
        let fractional =
            model.vars.iter().enumerate().find(|(v, var)| {
                var.binary && (lp.x[*v] - lp.x[*v].round()).abs() > INTEGRALITY_TOL
            });
        match fractional {
            None => {
                let mut x = lp.x;
                for (v, var) in model.vars.iter().enumerate() {
                    if var.binary {
                        x[v] = x[v].round();
                    }
                }
                let value: f64 = cost.iter().zip(&x).map(|(c, x)| c * x).sum();
                if incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                    incumbent = Some((value, x));
                }
            }
            Some((v, _)) => {
                for value in [0.0, 1.0] {
                    seq += 1;
                    let mut fixings = node.fixings.clone();
                    fixings.push((v, value));
                    heap.push(Node {
                        bound: lp.objective,
                        seq,
                        fixings,
                    });
                }
            }
        }
    }
    stats.elapsed = start.elapsed();

    let status = if limited {
        SolveStatus::LimitReached
    } else {
        SolveStatus::Optimal
    };
    match incumbent {
        Some((_, x)) => {
            let objective = model.objective_value(&x);
            Ok((Solution::from_values(model, status, x, objective), stats))
        }
        None if limited => Err(SolveError::NoIncumbent { nodes: stats.nodes }),
        None => Ok((Solution::infeasible(model), stats)),
    }
}

fn prunable(bound: f64, incumbent: f64) -> bool {
    bound >= incumbent - GAP_TOL * incumbent.abs().max(1.0)
}
