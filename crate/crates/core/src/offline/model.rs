//! Flow MILP construction over a time-expanded network.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::flownet::{EdgeKind, TENode, TimeExpandedNetwork, SINK, SOURCE};
use crate::instance::Instance;
use crate::metric::NodeId;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Maximise the smallest per-server reward, penalising unserved requests.
    #[default]
    MaxMin,
    /// Minimise total travelled cost with a single aggregate flow per edge.
    MinCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialMode {
    /// Servers may start at any location.
    #[default]
    Free,
    /// Servers start at the instance's initial positions.
    Fixed,
}

/// Shape of the cost-fairness row added when `alpha` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaForm {
    /// One row: total reward against alpha times the cost-weighted delivered flow.
    #[default]
    Cumulative,
    /// One row per request against that request's bare delivery flow.
    PerRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKind {
    Reward { server: usize },
    MinReward { server: usize },
    PickupCap { request: usize },
    Serve { request: usize },
    Conservation { node: usize, server: usize },
    SourceTotal,
    SinkTotal,
    UnitSupply { server: usize },
    StartCap { location: NodeId },
    Fairness { request: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub obj: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub kind: RowKind,
    pub coeffs: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * x[v]).sum()
    }

    /// Amount by which `x` violates the row, zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.cmp {
            Cmp::Le => (lhs - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - lhs).max(0.0),
            Cmp::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpConfig {
    pub objective: Objective,
    /// Defaults to [`default_penalty`].
    pub penalty: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_form: AlphaForm,
    pub initial_mode: InitialMode,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self {
            objective: Objective::MaxMin,
            penalty: None,
            alpha: None,
            alpha_form: AlphaForm::Cumulative,
            initial_mode: InitialMode::Free,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub objective: Objective,
    pub sense: Sense,
    pub penalty: f64,
    /// `None` when the fairness row is absent (including alpha = +inf).
    pub alpha: Option<f64>,
    pub alpha_form: AlphaForm,
    pub initial_mode: InitialMode,
    pub k: usize,
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
    /// `flow_vars[edge][server]`; a single column in MinCost mode.
    pub flow_vars: Vec<Vec<VarId>>,
    pub infeas_vars: Vec<VarId>,
    pub reward_vars: Vec<VarId>,
    pub minreward_var: Option<VarId>,
}

impl MilpModel {
    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of flow columns per edge: `k`, or 1 for the aggregate model.
    pub fn flow_columns(&self) -> usize {
        self.flow_vars.first().map_or(0, |v| v.len())
    }

    pub fn count_rows(&self, pred: impl Fn(&RowKind) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.obj * x).sum()
    }

    pub fn var_index(&self) -> BTreeMap<&str, VarId> {
        self.vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect()
    }
}

/// Penalty large enough that no reward or cost change can pay for leaving a
/// servable request unserved.
pub fn default_penalty(inst: &Instance) -> f64 {
    let deliveries: u64 = inst
        .requests
        .iter()
        .map(|r| inst.dist(r.source, r.dest))
        .sum();
    1.0 + deliveries as f64 + inst.requests.len() as f64 * inst.metric.diameter() as f64
}

pub fn build_flow_milp(
    net: &TimeExpandedNetwork<'_>,
    config: &MilpConfig,
) -> Result<MilpModel, ModelError> {
    let inst = net.instance;
    let penalty = config.penalty.unwrap_or_else(|| default_penalty(inst));
    if !(penalty.is_finite() && penalty > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "penalty must be positive, got {penalty}"
        )));
    }
    let alpha = match config.alpha {
        Some(a) if a.is_nan() || a <= 0.0 => {
            return Err(ModelError::InvalidParameter(format!(
                "alpha must be positive, got {a}"
            )))
        }
        Some(_) if config.objective == Objective::MinCost => {
            return Err(ModelError::InvalidParameter(
                "alpha applies only to the maxmin objective".into(),
            ))
        }
        Some(a) if a.is_infinite() => None,
        other => other,
    };
    match config.objective {
        Objective::MaxMin => Ok(build_maxmin(net, config, penalty, alpha)),
        Objective::MinCost => Ok(build_mincost(net, config, penalty)),
    }
}

struct Builder {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

impl Builder {
    fn var(&mut self, name: String, lower: f64, upper: f64, obj: f64, binary: bool) -> VarId {
        self.vars.push(Variable {
            name,
            lower,
            upper,
            obj,
            binary,
        });
        self.vars.len() - 1
    }

    fn row(&mut self, name: String, kind: RowKind, coeffs: Vec<(VarId, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Constraint {
            name,
            kind,
            coeffs,
            cmp,
            rhs,
        });
    }
}

/// Multiplicity of each initial location.
fn start_counts(inst: &Instance) -> BTreeMap<NodeId, usize> {
    let mut counts = BTreeMap::new();
    for &p in &inst.initial_positions {
        *counts.entry(p).or_insert(0) += 1;
    }
    counts
}

fn source_location(net: &TimeExpandedNetwork<'_>, edge: usize) -> NodeId {
    match net.nodes[net.edges[edge].to] {
        TENode::Grid { location, .. } => location,
        _ => unreachable!("source links end on grid nodes"),
    }
}

/// Conservation rows for one flow column at every grid and pickup node.
fn conservation(
    b: &mut Builder,
    net: &TimeExpandedNetwork<'_>,
    column: &dyn Fn(usize) -> VarId,
    server: usize,
) {
    for node in 0..net.nodes.len() {
        if node == SOURCE || node == SINK {
            continue;
        }
        let mut coeffs: Vec<(VarId, f64)> = net
            .in_edges(node)
            .iter()
            .map(|&e| (column(e), 1.0))
            .collect();
        coeffs.extend(net.out_edges(node).iter().map(|&e| (column(e), -1.0)));
        let name = format!("flow_{node}_{server}");
        b.row(
            name,
            RowKind::Conservation { node, server },
            coeffs,
            Cmp::Eq,
            0.0,
        );
    }
}

fn build_maxmin(
    net: &TimeExpandedNetwork<'_>,
    config: &MilpConfig,
    penalty: f64,
    alpha: Option<f64>,
) -> MilpModel {
    let inst = net.instance;
    let k = inst.k;
    let n = inst.requests.len();
    let fixed = config.initial_mode == InitialMode::Fixed;
    let starts = start_counts(inst);
    let mut b = Builder {
        vars: Vec::new(),
        rows: Vec::new(),
    };

    let mut flow_vars = Vec::with_capacity(net.edges.len());
    for (e, edge) in net.edges.iter().enumerate() {
        let upper = if fixed
            && edge.kind == EdgeKind::SourceLink
            && !starts.contains_key(&source_location(net, e))
        {
            0.0
        } else {
            1.0
        };
        let cols: Vec<VarId> = (0..k)
            .map(|i| b.var(format!("f{e}_{i}"), 0.0, upper, 0.0, false))
            .collect();
        flow_vars.push(cols);
    }
    let infeas_vars: Vec<VarId> = (0..n)
        .map(|j| b.var(format!("z{j}"), 0.0, 1.0, -penalty, true))
        .collect();
    let reward_vars: Vec<VarId> = (0..k)
        .map(|i| b.var(format!("m{i}"), 0.0, f64::INFINITY, 0.0, false))
        .collect();
    let minr = b.var("minr".into(), 0.0, f64::INFINITY, 1.0, false);

    for i in 0..k {
        let mut coeffs = vec![(reward_vars[i], 1.0)];
        for (e, edge) in net.edges.iter().enumerate() {
            if edge.cost > 0 {
                coeffs.push((flow_vars[e][i], -(edge.cost as f64)));
            }
        }
        b.row(
            format!("reward_{i}"),
            RowKind::Reward { server: i },
            coeffs,
            Cmp::Eq,
            0.0,
        );
    }
    for i in 0..k {
        let coeffs = vec![(minr, 1.0), (reward_vars[i], -1.0)];
        b.row(
            format!("minr_{i}"),
            RowKind::MinReward { server: i },
            coeffs,
            Cmp::Le,
            0.0,
        );
    }
    for j in 0..n {
        let coeffs = net
            .in_edges(net.pickup(j))
            .iter()
            .flat_map(|&e| flow_vars[e].iter().map(|&v| (v, 1.0)))
            .collect();
        b.row(
            format!("pickup_{j}"),
            RowKind::PickupCap { request: j },
            coeffs,
            Cmp::Le,
            1.0,
        );
    }
    for j in 0..n {
        let mut coeffs = vec![(infeas_vars[j], 1.0)];
        coeffs.extend(flow_vars[net.delivery_edge(j)].iter().map(|&v| (v, 1.0)));
        b.row(
            format!("serve_{j}"),
            RowKind::Serve { request: j },
            coeffs,
            Cmp::Eq,
            1.0,
        );
    }
    for i in 0..k {
        conservation(&mut b, net, &|e| flow_vars[e][i], i);
    }
    push_totals(&mut b, net, &flow_vars, k as f64);
    for i in 0..k {
        let coeffs = net
            .out_edges(SOURCE)
            .iter()
            .map(|&e| (flow_vars[e][i], 1.0))
            .collect();
        b.row(
            format!("unit_{i}"),
            RowKind::UnitSupply { server: i },
            coeffs,
            Cmp::Eq,
            1.0,
        );
    }
    if fixed {
        for &e in net.out_edges(SOURCE) {
            let location = source_location(net, e);
            if let Some(&count) = starts.get(&location) {
                let coeffs = flow_vars[e].iter().map(|&v| (v, 1.0)).collect();
                let name = format!("start_{location}");
                b.row(
                    name,
                    RowKind::StartCap { location },
                    coeffs,
                    Cmp::Le,
                    count as f64,
                );
            }
        }
    }
    if let Some(alpha) = alpha {
        let rewards = reward_vars.iter().map(|&v| (v, 1.0));
        match config.alpha_form {
            AlphaForm::Cumulative => {
                let mut coeffs: Vec<_> = rewards.collect();
                for j in 0..n {
                    let c = net.edges[net.delivery_edge(j)].cost as f64;
                    if c > 0.0 {
                        coeffs.extend(
                            flow_vars[net.delivery_edge(j)]
                                .iter()
                                .map(|&v| (v, -alpha * c)),
                        );
                    }
                }
                b.row(
                    "fair".into(),
                    RowKind::Fairness { request: None },
                    coeffs,
                    Cmp::Le,
                    0.0,
                );
            }
            AlphaForm::PerRequest => {
                for j in 0..n {
                    let mut coeffs: Vec<_> = rewards.clone().collect();
                    coeffs.extend(flow_vars[net.delivery_edge(j)].iter().map(|&v| (v, -alpha)));
                    let kind = RowKind::Fairness { request: Some(j) };
                    b.row(format!("fair_{j}"), kind, coeffs, Cmp::Le, 0.0);
                }
            }
        }
    }

    MilpModel {
        objective: Objective::MaxMin,
        sense: Sense::Maximize,
        penalty,
        alpha,
        alpha_form: config.alpha_form,
        initial_mode: config.initial_mode,
        k,
        vars: b.vars,
        rows: b.rows,
        flow_vars,
        infeas_vars,
        reward_vars,
        minreward_var: Some(minr),
    }
}

fn push_totals(b: &mut Builder, net: &TimeExpandedNetwork<'_>, flow_vars: &[Vec<VarId>], k: f64) {
    let out = net
        .out_edges(SOURCE)
        .iter()
        .flat_map(|&e| flow_vars[e].iter().map(|&v| (v, 1.0)));
    b.row(
        "supply".into(),
        RowKind::SourceTotal,
        out.collect(),
        Cmp::Eq,
        k,
    );
    let inn = net
        .in_edges(SINK)
        .iter()
        .flat_map(|&e| flow_vars[e].iter().map(|&v| (v, 1.0)));
    b.row(
        "demand".into(),
        RowKind::SinkTotal,
        inn.collect(),
        Cmp::Eq,
        k,
    );
}

fn build_mincost(net: &TimeExpandedNetwork<'_>, config: &MilpConfig, penalty: f64) -> MilpModel {
    let inst = net.instance;
    let k = inst.k;
    let n = inst.requests.len();
    let starts = start_counts(inst);
    let mut b = Builder {
        vars: Vec::new(),
        rows: Vec::new(),
    };

    let mut flow_vars = Vec::with_capacity(net.edges.len());
    for (e, edge) in net.edges.iter().enumerate() {
        let upper = match (config.initial_mode, edge.kind) {
            (InitialMode::Fixed, EdgeKind::SourceLink) => {
                starts.get(&source_location(net, e)).copied().unwrap_or(0) as f64
            }
            _ => k as f64,
        };
        flow_vars.push(vec![b.var(
            format!("f{e}"),
            0.0,
            upper,
            edge.cost as f64,
            false,
        )]);
    }
    let infeas_vars: Vec<VarId> = (0..n)
        .map(|j| b.var(format!("z{j}"), 0.0, 1.0, penalty, true))
        .collect();

    for j in 0..n {
        let coeffs = net
            .in_edges(net.pickup(j))
            .iter()
            .map(|&e| (flow_vars[e][0], 1.0))
            .collect();
        b.row(
            format!("pickup_{j}"),
            RowKind::PickupCap { request: j },
            coeffs,
            Cmp::Le,
            1.0,
        );
    }
    for j in 0..n {
        let coeffs = vec![
            (infeas_vars[j], 1.0),
            (flow_vars[net.delivery_edge(j)][0], 1.0),
        ];
        b.row(
            format!("serve_{j}"),
            RowKind::Serve { request: j },
            coeffs,
            Cmp::Eq,
            1.0,
        );
    }
    conservation(&mut b, net, &|e| flow_vars[e][0], 0);
    push_totals(&mut b, net, &flow_vars, k as f64);

    MilpModel {
        objective: Objective::MinCost,
        sense: Sense::Minimize,
        penalty,
        alpha: None,
        alpha_form: config.alpha_form,
        initial_mode: config.initial_mode,
        k,
        vars: b.vars,
        rows: b.rows,
        flow_vars,
        infeas_vars,
        reward_vars: Vec::new(),
        minreward_var: None,
    }
}
