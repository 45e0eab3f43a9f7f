use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use kfood::flownet::build_network;
use kfood::instance::{gen_partition_instance, gen_synthetic, load_instance, SyntheticParams};
use kfood::metric::gen_erdos_renyi;
use kfood::metrics::{
    evaluate, evaluate_simulation, lorenz_curve, mean_metrics, write_lorenz_csv, write_metrics_csv,
    Metrics,
};
use kfood::offline::{
    build_flow_milp, decompose_server_rewards, solve_embedded, solve_external, InitialMode,
    MilpConfig, Objective, Solution, SolveLimits, SolveStatus,
};
use kfood::online::{simulate_batch, write_ndjson, Policy, SimOptions, TraceEvent};
use kfood::{Exec, Instance};
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig, GenSpec, InstanceSource, SolverSpec, StartMode};

/// An error tagged with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_INSTANCE: u8 = 4;
const EXIT_IO: u8 = 1;

impl CliError {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_CONFIG,
            error: e.into(),
        }
    }
    pub fn solver(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_SOLVER,
            error: e.into(),
        }
    }
    pub fn instance(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INSTANCE,
            error: e.into(),
        }
    }
    pub fn io(e: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_IO,
            error: e.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Seeds for the metric and the requests are derived from one user seed.
pub fn request_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x5eed)
}

pub fn generate(spec: &GenSpec) -> CliResult<Instance> {
    match spec {
        GenSpec::Syn {
            nodes,
            p,
            requests,
            k,
            seed,
            speed,
            weights,
        } => {
            let metric = gen_erdos_renyi(*nodes, *p, weights.0..=weights.1, *seed)
                .map_err(CliError::config)?;
            let params = SyntheticParams {
                n_requests: *requests,
                k: *k,
                speed: *speed,
                ..Default::default()
            };
            gen_synthetic(metric, &params, request_seed(*seed)).map_err(CliError::config)
        }
        GenSpec::Star { d, k, slack } => {
            gen_partition_instance(d, *k, *slack).map_err(CliError::config)
        }
    }
}

pub fn load(path: &Path) -> CliResult<Instance> {
    let file = File::open(path)
        .with_context(|| format!("cannot open instance {}", path.display()))
        .map_err(CliError::instance)?;
    let (inst, warnings) = load_instance(std::io::BufReader::new(file))
        .with_context(|| format!("cannot read instance {}", path.display()))
        .map_err(CliError::instance)?;
    for w in warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    check(&inst)?;
    Ok(inst)
}

pub fn check(inst: &Instance) -> CliResult<()> {
    inst.validate().map_err(|v| {
        let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        CliError::instance(anyhow!("invalid instance: {}", list.join("; ")))
    })
}

pub fn resolve_instance(source: &InstanceSource) -> CliResult<Instance> {
    match source {
        InstanceSource::File(p) => load(p),
        InstanceSource::Generate(spec) => {
            let inst = generate(spec)?;
            check(&inst)?;
            Ok(inst)
        }
    }
}

/// Settings shared by every offline solve.
#[derive(Debug, Clone)]
pub struct OfflineSettings {
    pub penalty: Option<f64>,
    pub alpha_form: kfood::offline::AlphaForm,
    pub initial_mode: StartMode,
    pub solver: SolverSpec,
    pub limits: SolveLimits,
    /// Directory for external-solver scratch files.
    pub workdir: PathBuf,
}

pub struct OfflineRun {
    pub metrics: Metrics,
    pub solution: Solution,
}

pub fn milp_config(objective: Objective, alpha: Option<f64>, s: &OfflineSettings) -> MilpConfig {
    MilpConfig {
        objective,
        penalty: s.penalty,
        alpha,
        alpha_form: s.alpha_form,
        initial_mode: match s.initial_mode {
            StartMode::Free => InitialMode::Free,
            StartMode::Fixed => InitialMode::Fixed,
        },
    }
}

pub fn solve_offline(
    inst: &Instance,
    config: &MilpConfig,
    s: &OfflineSettings,
) -> CliResult<OfflineRun> {
    let net = build_network(inst).map_err(CliError::instance)?;
    let model = build_flow_milp(&net, config).map_err(CliError::config)?;
    let solution = match &s.solver {
        SolverSpec::Embedded => solve_embedded(&model, s.limits).map_err(CliError::solver)?,
        SolverSpec::External(cmd) => {
            fs::create_dir_all(&s.workdir).map_err(CliError::io)?;
            solve_external(&model, cmd, &s.workdir)
                .with_context(|| format!("external solver `{cmd}`"))
                .map_err(CliError::solver)?
        }
    };
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::LimitReached => {
            eprintln!("warning: solve stopped at a limit; reporting the incumbent")
        }
        SolveStatus::Infeasible => {
            return Err(CliError::solver(anyhow!(
                "solver reported the model infeasible"
            )))
        }
    }
    let rewards: Vec<f64> = match config.objective {
        Objective::MaxMin => solution.rewards.clone(),
        Objective::MinCost => decompose_server_rewards(&solution, &net, inst.k),
    };
    // clamp solver noise like -1e-12
    let rewards: Vec<f64> = rewards.into_iter().map(|x| x.max(0.0)).collect();
    let metrics = evaluate(&rewards, solution.unserved_count());
    Ok(OfflineRun { metrics, solution })
}

pub struct OnlineRun {
    pub metrics: Metrics,
    pub traces: Vec<(u64, Vec<TraceEvent>)>,
}

/// Random is averaged over all seeds; deterministic policies run once.
pub fn run_online(
    inst: &Instance,
    policy: Policy,
    seeds: &[u64],
    trace: bool,
    exec: Exec,
) -> CliResult<OnlineRun> {
    let seeds = if policy.is_stochastic() {
        seeds
    } else {
        &seeds[..1]
    };
    let runs: Vec<(Policy, u64)> = seeds.iter().map(|&s| (policy, s)).collect();
    let results =
        simulate_batch(inst, &runs, SimOptions { trace }, exec).map_err(CliError::instance)?;
    let per_seed: Vec<Metrics> = results.iter().map(evaluate_simulation).collect();
    let metrics = mean_metrics(&per_seed).expect("at least one seed");
    let traces = results
        .into_iter()
        .filter_map(|r| r.trace.map(|t| (r.seed, t)))
        .collect();
    Ok(OnlineRun { metrics, traces })
}

pub fn write_algorithm_outputs(
    dir: &Path,
    metrics: &Metrics,
    traces: &[(u64, Vec<TraceEvent>)],
) -> CliResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(CliError::io)?;
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::io)
    };
    write_metrics_csv(metrics, create("metrics.csv")?).map_err(CliError::io)?;
    write_lorenz_csv(&lorenz_curve(&metrics.rewards), create("lorenz.csv")?)
        .map_err(CliError::io)?;
    for (seed, events) in traces {
        write_ndjson(events, create(&format!("trace_seed{seed}.ndjson"))?).map_err(CliError::io)?;
    }
    Ok(())
}

/// One line of the cross-algorithm summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub unserved: usize,
    pub cost: f64,
    pub min_reward: f64,
    pub zero_count: usize,
}

impl SummaryRow {
    pub fn new(algorithm: &str, m: &Metrics) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            unserved: m.unserved,
            cost: m.cost,
            min_reward: m.min_reward,
            zero_count: m.zero_reward_count,
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("algorithm,unserved,cost,min_reward,zero_count\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            r.algorithm, r.unserved, r.cost, r.min_reward, r.zero_count
        ));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct FailureRecord {
    pub algorithm: String,
    pub exit_code: u8,
    pub error: String,
}

pub struct RunReport {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<FailureRecord>,
}

/// Runs every configured algorithm, writes per-algorithm files, the summary
/// and (on any failure) `failures.json`.
pub fn run_experiment(cfg: &ExperimentConfig, inst: &Instance, exec: Exec) -> CliResult<RunReport> {
    let out = &cfg.output;
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(CliError::io)?;
    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();

    let settings = OfflineSettings {
        penalty: cfg.penalty.value(),
        alpha_form: Default::default(),
        initial_mode: cfg.initial_mode,
        solver: cfg.solver.clone(),
        limits: SolveLimits::default(),
        workdir: out.join("solver"),
    };
    let results = kfood::exec::map(exec, &algorithms, |&alg| -> CliResult<OnlineRun> {
        match alg {
            Algorithm::Online(p) => run_online(inst, p, &cfg.seeds, cfg.trace, Exec::Sequential),
            offline => {
                let (objective, alpha) = match offline {
                    Algorithm::FlowMilp => (Objective::MaxMin, None),
                    Algorithm::FlowMilp2s => (Objective::MaxMin, cfg.alpha),
                    _ => (Objective::MinCost, None),
                };
                let s = OfflineSettings {
                    workdir: settings.workdir.join(alg.name()),
                    ..settings.clone()
                };
                let run = solve_offline(inst, &milp_config(objective, alpha, &s), &s)?;
                Ok(OnlineRun {
                    metrics: run.metrics,
                    traces: Vec::new(),
                })
            }
        }
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (alg, result) in algorithms.iter().zip(results) {
        match result {
            Ok(run) => {
                write_algorithm_outputs(&out.join(alg.name()), &run.metrics, &run.traces)?;
                rows.push(SummaryRow::new(alg.name(), &run.metrics));
            }
            Err(e) => {
                eprintln!("error: {alg}: {:#}", e.error);
                failures.push(FailureRecord {
                    algorithm: alg.name().into(),
                    exit_code: e.code,
                    error: format!("{:#}", e.error),
                });
            }
        }
    }
    let write = |name: &str, text: String| {
        let path = out.join(name);
        fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::io)
    };
    write("metrics.csv", summary_csv(&rows))?;
    let manifest = out.join("failures.json");
    if failures.is_empty() {
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(CliError::io)?;
        }
    } else {
        write(
            "failures.json",
            serde_json::to_string_pretty(&failures).expect("plain data") + "\n",
        )?;
    }
    Ok(RunReport { rows, failures })
}

/// Rebuilds the summary from the per-algorithm `metrics.csv` files under `dir`.
pub fn reaggregate(dir: &Path) -> CliResult<Vec<SummaryRow>> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))
        .map_err(CliError::config)?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("metrics.csv").is_file())
        .collect();
    dirs.sort();
    let mut rows = Vec::new();
    for path in dirs {
        let name = path
            .file_name()
            .expect("directory entry")
            .to_string_lossy()
            .to_string();
        let file = path.join("metrics.csv");
        let text = fs::read_to_string(&file).map_err(CliError::io)?;
        let row = parse_metrics(&name, &text)
            .with_context(|| format!("malformed {}", file.display()))
            .map_err(CliError::config)?;
        rows.push(row);
    }
    Ok(rows)
}

fn parse_metrics(algorithm: &str, text: &str) -> anyhow::Result<SummaryRow> {
    let get = |key: &str| -> anyhow::Result<&str> {
        text.lines()
            .skip(1)
            .filter_map(|l| l.split_once(','))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| anyhow!("missing `{key}`"))
    };
    Ok(SummaryRow {
        algorithm: algorithm.to_string(),
        unserved: get("unserved")?.parse()?,
        cost: get("cost")?.parse()?,
        min_reward: get("min_reward")?.parse()?,
        zero_count: get("zero_reward_count")?.parse()?,
    })
}
