//! Offline flow formulations over the time-expanded network: model
//! construction, LP-format export, an embedded branch-and-bound solver, an
//! external-solver adapter, an independent residual checker and an
//! exhaustive oracle for tiny instances.

mod bnb;
mod external;
mod lp_format;
mod model;
mod oracle;
mod rewards;
pub mod simplex;
mod verify;

pub use bnb::{
    solve_embedded, solve_embedded_with_stats, SolveError, SolveLimits, SolveStats,
    MAX_EMBEDDED_VARIABLES, MAX_TABLEAU_CELLS,
};
pub use external::{solve_external, ExternalError};
pub use lp_format::{export_lp, parse_external_solution, write_solution, ParseSolutionError};
pub use model::{
    build_flow_milp, default_penalty, AlphaForm, Cmp, Constraint, InitialMode, MilpConfig,
    MilpModel, ModelError, Objective, RowKind, Sense, VarId, Variable,
};
pub use oracle::{
    brute_force_oracle, brute_force_oracle_with, OracleError, OracleOptions, OracleResult,
    OracleTiming, ORACLE_MAX_REQUESTS, ORACLE_MAX_SERVERS,
};
pub use rewards::{decompose_server_rewards, extract_rewards, RewardReport};
pub use verify::{verify_solution, Residual, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitReached,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::LimitReached => "LimitReached",
        }
    }
}

/// A point of a [`MilpModel`] together with the views callers need.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective_value: f64,
    /// Value of every model variable, indexed by [`VarId`].
    pub values: Vec<f64>,
    /// `flows[edge][server]`; one column for the aggregate model.
    pub flows: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    /// Per-server rewards; empty for the aggregate model.
    pub rewards: Vec<f64>,
    pub min_reward: Option<f64>,
}

impl Solution {
    pub fn from_values(
        model: &MilpModel,
        status: SolveStatus,
        values: Vec<f64>,
        objective: f64,
    ) -> Self {
        let flows = model
            .flow_vars
            .iter()
            .map(|cols| cols.iter().map(|&v| values[v]).collect())
            .collect();
        let z = model.infeas_vars.iter().map(|&v| values[v]).collect();
        let rewards = model.reward_vars.iter().map(|&v| values[v]).collect();
        let min_reward = model.minreward_var.map(|v| values[v]);
        Solution {
            status,
            objective_value: objective,
            values,
            flows,
            z,
            rewards,
            min_reward,
        }
    }

    pub fn infeasible(model: &MilpModel) -> Self {
        let values = vec![0.0; model.var_count()];
        Self::from_values(model, SolveStatus::Infeasible, values, f64::NAN)
    }

    /// Averages the per-server flows. Every row of the maxmin model treats
    /// servers interchangeably, so the result is feasible, has equal rewards
    /// and an objective no worse than the input.
    pub fn symmetrized(&self, model: &MilpModel) -> Self {
        if model.objective != Objective::MaxMin || model.k == 0 {
            return self.clone();
        }
        let k = model.k as f64;
        let mut values = self.values.clone();
        for cols in &model.flow_vars {
            let mean = cols.iter().map(|&v| self.values[v]).sum::<f64>() / k;
            for &v in cols {
                values[v] = mean;
            }
        }
        let mean_reward = model
            .reward_vars
            .iter()
            .map(|&v| self.values[v])
            .sum::<f64>()
            / k;
        for &v in &model.reward_vars {
            values[v] = mean_reward;
        }
        if let Some(v) = model.minreward_var {
            values[v] = mean_reward;
        }
        let objective = model.objective_value(&values);
        Self::from_values(model, self.status, values, objective)
    }

    pub fn unserved_count(&self) -> usize {
        self.z.iter().filter(|&&z| z > 0.5).count()
    }
}
