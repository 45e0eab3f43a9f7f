use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use kfood::online::Policy;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Algorithm {
    FlowMilp,
    FlowMilp2s,
    MinCost,
    Online(Policy),
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::FlowMilp,
        Algorithm::FlowMilp2s,
        Algorithm::MinCost,
        Algorithm::Online(Policy::Random),
        Algorithm::Online(Policy::GreedyMin),
        Algorithm::Online(Policy::Doc4Food),
        Algorithm::Online(Policy::MinDelta),
        Algorithm::Online(Policy::RoundRobin),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FlowMilp => "flow-milp",
            Algorithm::FlowMilp2s => "flow-milp-2s",
            Algorithm::MinCost => "min-cost",
            Algorithm::Online(p) => p.name(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn compact(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = compact(s);
        Algorithm::ALL
            .into_iter()
            .find(|a| compact(a.name()) == key)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!(
                    "unknown algorithm `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

impl TryFrom<String> for Algorithm {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Penalty {
    #[default]
    Auto,
    Value(f64),
}

impl Penalty {
    pub fn value(&self) -> Option<f64> {
        match self {
            Penalty::Auto => None,
            Penalty::Value(v) => Some(*v),
        }
    }
}

impl FromStr for Penalty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Penalty::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Penalty::Value(v)),
            _ => Err(format!(
                "penalty must be `auto` or a positive number, got `{s}`"
            )),
        }
    }
}

impl<'de> Deserialize<'de> for Penalty {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Null => Ok(Penalty::Auto),
            serde_json::Value::Number(n) => n.to_string().parse().map_err(serde::de::Error::custom),
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!("invalid penalty {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(try_from = "String")]
pub enum SolverSpec {
    #[default]
    Embedded,
    /// Command line; the model path is appended as the last argument.
    External(String),
}

impl FromStr for SolverSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "embedded" {
            return Ok(SolverSpec::Embedded);
        }
        match s.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(SolverSpec::External(cmd.trim().to_string())),
            _ => Err(format!(
                "solver must be `embedded` or `external:<command>`, got `{s}`"
            )),
        }
    }
}

impl TryFrom<String> for SolverSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    #[default]
    Free,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSource {
    File(PathBuf),
    Generate(GenSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GenSpec {
    Syn {
        nodes: usize,
        p: f64,
        requests: usize,
        k: usize,
        seed: u64,
        #[serde(default = "one")]
        speed: f64,
        #[serde(default = "default_weights")]
        weights: (u64, u64),
    },
    Star {
        d: Vec<u64>,
        k: usize,
        #[serde(default = "default_slack")]
        slack: i64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_weights() -> (u64, u64) {
    (10, 10_000)
}

fn default_slack() -> i64 {
    3
}

pub fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL
        .iter()
        .copied()
        .filter(|a| matches!(a, Algorithm::Online(_)))
        .collect()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub penalty: Penalty,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub initial_mode: StartMode,
    #[serde(default)]
    pub trace: bool,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSource) -> Self {
        Self {
            instance,
            algorithms: default_algorithms(),
            seeds: default_seeds(),
            alpha: None,
            penalty: Penalty::Auto,
            solver: SolverSpec::Embedded,
            output: default_output(),
            initial_mode: StartMode::Free,
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.algorithms.is_empty() {
            return Err("no algorithms selected".into());
        }
        if self.seeds.is_empty() {
            return Err("seed list is empty".into());
        }
        if let Some(a) = self.alpha {
            if a.is_nan() || a <= 0.0 {
                return Err(format!("alpha must be positive, got {a}"));
            }
        }
        if self.algorithms.contains(&Algorithm::FlowMilp2s) && self.alpha.is_none() {
            return Err("flow-milp-2s requires alpha".into());
        }
        Ok(())
    }
}
