//! Residual checks recomputed from the network itself.
//!
//! Nothing here reads the model's rows or touches the simplex: balances,
//! pickup inflows and rewards are accumulated directly from `net.edges`, and
//! the model contributes only its configuration (objective, alpha, start mode).

use std::collections::BTreeMap;

use crate::flownet::{EdgeKind, TENode, TimeExpandedNetwork, SINK, SOURCE};

use super::model::{AlphaForm, InitialMode, MilpModel, Objective};
use super::{Solution, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub what: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub max_residual: f64,
    /// Every check whose residual exceeded `1e-9`, largest first.
    pub violations: Vec<Residual>,
    pub checks: usize,
}

impl VerifyReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }

    fn record(&mut self, what: impl FnOnce() -> String, amount: f64) {
        self.checks += 1;
        let amount = if amount.is_nan() {
            f64::INFINITY
        } else {
            amount.max(0.0)
        };
        if amount > self.max_residual {
            self.max_residual = amount;
        }
        if amount > 1e-9 {
            self.violations.push(Residual {
                what: what(),
                amount,
            });
        }
    }
}

pub fn verify_solution(
    net: &TimeExpandedNetwork<'_>,
    model: &MilpModel,
    sol: &Solution,
) -> VerifyReport {
    let mut rep = VerifyReport::default();
    if sol.status == SolveStatus::Infeasible {
        return rep;
    }
    let inst = net.instance;
    let k = inst.k;
    let n = inst.requests.len();
    let aggregate = model.objective == Objective::MinCost;
    let cols = if aggregate { 1 } else { k };
    if sol.flows.len() != net.edges.len() || sol.flows.iter().any(|f| f.len() != cols) {
        rep.record(|| "flow table shape".into(), f64::INFINITY);
        return rep;
    }
    if sol.z.len() != n {
        rep.record(|| "z length".into(), f64::INFINITY);
        return rep;
    }
    let cap = if aggregate { k as f64 } else { 1.0 };

    for (e, flows) in sol.flows.iter().enumerate() {
        for (i, &f) in flows.iter().enumerate() {
            rep.record(|| format!("bounds of flow {e}/{i}"), (-f).max(f - cap));
        }
    }
    for (j, &z) in sol.z.iter().enumerate() {
        rep.record(|| format!("bounds of z{j}"), (-z).max(z - 1.0));
        rep.record(|| format!("integrality of z{j}"), (z - z.round()).abs());
    }

    // conservation, from edge endpoints
    let mut balance = vec![vec![0.0f64; cols]; net.nodes.len()];
    for (edge, flows) in net.edges.iter().zip(&sol.flows) {
        for (i, &f) in flows.iter().enumerate() {
            balance[edge.to][i] += f;
            balance[edge.from][i] -= f;
        }
    }
    for (node, b) in balance.iter().enumerate() {
        if node == SOURCE || node == SINK {
            continue;
        }
        for (i, &v) in b.iter().enumerate() {
            rep.record(
                || format!("conservation at node {node} for column {i}"),
                v.abs(),
            );
        }
    }

    let mut supply = vec![0.0; cols];
    let mut demand = 0.0;
    let mut pickup_in = vec![0.0; n];
    let mut delivered = vec![0.0; n];
    let mut earned = vec![0.0; cols];
    let mut start_flow: BTreeMap<usize, f64> = BTreeMap::new();
    for (edge, flows) in net.edges.iter().zip(&sol.flows) {
        let total: f64 = flows.iter().sum();
        for (i, &f) in flows.iter().enumerate() {
            earned[i] += edge.cost as f64 * f;
        }
        match (edge.kind, edge.request) {
            (EdgeKind::SourceLink, _) => {
                for (s, &f) in supply.iter_mut().zip(flows) {
                    *s += f;
                }
                if let TENode::Grid { location, .. } = net.nodes[edge.to] {
                    *start_flow.entry(location).or_insert(0.0) += total;
                }
            }
            (EdgeKind::SinkLink, _) => demand += total,
            (EdgeKind::Approach, Some(j)) => pickup_in[j] += total,
            (EdgeKind::Delivery, Some(j)) => delivered[j] += total,
            _ => {}
        }
    }
    let total_supply: f64 = supply.iter().sum();
    rep.record(
        || "source outflow equals k".into(),
        (total_supply - k as f64).abs(),
    );
    rep.record(|| "sink inflow equals k".into(), (demand - k as f64).abs());
    if !aggregate {
        for (i, &s) in supply.iter().enumerate() {
            rep.record(|| format!("unit supply of server {i}"), (s - 1.0).abs());
        }
    }
    if model.initial_mode == InitialMode::Fixed {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &p in &inst.initial_positions {
            *counts.entry(p).or_insert(0) += 1;
        }
        for (&location, &f) in &start_flow {
            let allowed = counts.get(&location).copied().unwrap_or(0) as f64;
            rep.record(|| format!("start cap at location {location}"), f - allowed);
        }
    }
    for j in 0..n {
        rep.record(
            || format!("pickup inflow of request {j}"),
            pickup_in[j] - 1.0,
        );
        rep.record(
            || format!("service of request {j}"),
            (sol.z[j] + delivered[j] - 1.0).abs(),
        );
    }

    let penalty = model.penalty;
    let z_total: f64 = sol.z.iter().sum();
    if aggregate {
        let objective = earned[0] + penalty * z_total;
        rep.record(
            || "objective value".into(),
            (objective - sol.objective_value).abs(),
        );
        rep.violations.sort_by(|a, b| b.amount.total_cmp(&a.amount));
        return rep;
    }

    if sol.rewards.len() != k {
        rep.record(|| "reward vector length".into(), f64::INFINITY);
        return rep;
    }
    let Some(min_reward) = sol.min_reward else {
        rep.record(|| "missing minimum reward".into(), f64::INFINITY);
        return rep;
    };
    for i in 0..k {
        rep.record(
            || format!("reward of server {i}"),
            (sol.rewards[i] - earned[i]).abs(),
        );
        rep.record(
            || format!("minimum reward below server {i}"),
            min_reward - sol.rewards[i],
        );
    }
    let objective = min_reward - penalty * z_total;
    rep.record(
        || "objective value".into(),
        (objective - sol.objective_value).abs(),
    );

    if let Some(alpha) = model.alpha {
        let total_reward: f64 = sol.rewards.iter().sum();
        match model.alpha_form {
            AlphaForm::Cumulative => {
                let weighted: f64 = (0..n)
                    .map(|j| {
                        let r = &inst.requests[j];
                        inst.dist(r.source, r.dest) as f64 * delivered[j]
                    })
                    .sum();
                rep.record(
                    || "cost-fairness bound".into(),
                    total_reward - alpha * weighted,
                );
            }
            AlphaForm::PerRequest => {
                for j in 0..n {
                    let amount = total_reward - alpha * delivered[j];
                    rep.record(|| format!("cost-fairness bound of request {j}"), amount);
                }
            }
        }
    }
    rep.violations.sort_by(|a, b| b.amount.total_cmp(&a.amount));
    rep
}
