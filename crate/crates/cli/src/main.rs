//! `kfood`: generate instances, solve them offline, simulate the online
//! policies and write comparison reports.

mod config;
mod pipeline;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kfood::instance::{ingest_csv, save_instance, CsvIngestOptions};
use kfood::metric::{GraphFile, MetricSpace};
use kfood::offline::{export_lp, write_solution, AlphaForm, Objective, SolveLimits};
use kfood::online::Policy;
use kfood::{Exec, Instance};

use config::{
    default_seeds, Algorithm, ExperimentConfig, GenSpec, InstanceSource, Penalty, SolverSpec,
    StartMode,
};
use pipeline::{CliError, CliResult, OfflineSettings, SummaryRow};

#[derive(Parser)]
#[command(
    name = "kfood",
    version,
    about = "Fair k-food: offline flow solver and online dispatch simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run several algorithms on one instance and write a comparison report.
    Run(RunArgs),
    /// Solve the offline model only.
    Solve(SolveArgs),
    /// Run online policies only.
    Simulate(SimulateArgs),
    /// Rebuild the summary table from an existing output directory.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum GenKind {
    /// Erdos-Renyi graph with uniform synthetic requests.
    Syn(SynArgs),
    /// Star graph partition instance.
    Star(StarArgs),
    /// Delivery trace CSV mapped onto a graph file.
    Csv(CsvArgs),
}

#[derive(Args)]
struct SynArgs {
    #[arg(long, default_value_t = 500)]
    nodes: usize,
    /// Edge probability.
    #[arg(long = "p", default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 250)]
    requests: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Distance units per time unit.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long, default_value_t = 10)]
    min_weight: u64,
    #[arg(long, default_value_t = 10_000)]
    max_weight: u64,
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StarArgs {
    /// Leaf distances, comma separated.
    #[arg(long = "d", value_delimiter = ',', required = true)]
    d: Vec<u64>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    slack: i64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CsvArgs {
    /// Orders: order_id,source_node,dest_node,arrival_ts,pickup_deadline_ts
    #[arg(long)]
    input: PathBuf,
    /// Graph JSON: {"nodes": n, "edges": [[u, v, w], ...]}
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    eta: i64,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long)]
    horizon: Option<i64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Comma separated, e.g. flow-milp,greedy-min,doc4food
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// `auto` or a positive number.
    #[arg(long)]
    penalty: Option<Penalty>,
    /// `embedded` or `external:<command>`.
    #[arg(long)]
    solver: Option<SolverSpec>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    initial_mode: Option<StartMode>,
    /// Write NDJSON event traces for online runs.
    #[arg(long)]
    trace: bool,
    /// Run algorithms one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Maxmin,
    Mincost,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaFormArg {
    Cumulative,
    PerRequest,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "maxmin")]
    objective: ObjectiveArg,
    /// Cost-fairness bound; maxmin only.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "cumulative")]
    alpha_form: AlphaFormArg,
    #[arg(long, default_value = "auto")]
    penalty: Penalty,
    #[arg(long, value_enum, default_value = "free")]
    initial_mode: StartMode,
    #[arg(long, default_value = "embedded")]
    solver: SolverSpec,
    /// Write the model in LP format.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Stop after writing `--export`.
    #[arg(long, requires = "export")]
    export_only: bool,
    /// Write the solution as `name value` lines.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = SolveLimits::default().max_nodes)]
    max_nodes: usize,
    /// Seconds.
    #[arg(long, default_value_t = SolveLimits::default().time.as_secs_f64())]
    time_limit: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma separated; all five when omitted.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of an earlier `run`, `solve` or `simulate`.
    #[arg(long)]
    out: PathBuf,
}

fn write_target(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("cannot write {}", p.display()))
                .map_err(CliError::io)?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn save(inst: &Instance, output: Option<&Path>) -> CliResult<()> {
    pipeline::check(inst)?;
    let mut sink = write_target(output)?;
    save_instance(inst, &mut sink).map_err(CliError::io)?;
    sink.flush().map_err(CliError::io)
}

fn cmd_gen(kind: GenKind) -> CliResult<()> {
    match kind {
        GenKind::Syn(a) => {
            let spec = GenSpec::Syn {
                nodes: a.nodes,
                p: a.p,
                requests: a.requests,
                k: a.k,
                seed: a.seed,
                speed: a.speed,
                weights: (a.min_weight, a.max_weight),
            };
            save(&pipeline::generate(&spec)?, a.output.as_deref())
        }
        GenKind::Star(a) => {
            let spec = GenSpec::Star {
                d: a.d,
                k: a.k,
                slack: a.slack,
            };
            save(&pipeline::generate(&spec)?, a.output.as_deref())
        }
        GenKind::Csv(a) => {
            let text = fs::read_to_string(&a.graph)
                .with_context(|| format!("cannot read {}", a.graph.display()))
                .map_err(CliError::instance)?;
            let graph: GraphFile = serde_json::from_str(&text)
                .with_context(|| format!("bad graph file {}", a.graph.display()))
                .map_err(CliError::instance)?;
            let metric = MetricSpace::from_graph_file(&graph).map_err(CliError::instance)?;
            let orders = File::open(&a.input)
                .with_context(|| format!("cannot open {}", a.input.display()))
                .map_err(CliError::instance)?;
            let opts = CsvIngestOptions {
                k: a.k,
                initial_positions: None,
                seed: a.seed,
                eta: a.eta,
                speed: a.speed,
                horizon: a.horizon,
            };
            let (inst, warnings) = ingest_csv(orders, metric, &opts).map_err(CliError::instance)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            save(&inst, a.output.as_deref())
        }
    }
}

fn print_summary(rows: &[SummaryRow]) {
    print!("{}", pipeline::summary_csv(rows));
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let mut cfg = match (&a.config, &a.instance) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(CliError::config)?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("bad config {}", path.display()))
                .map_err(CliError::config)?
        }
        (None, Some(inst)) => ExperimentConfig::new(InstanceSource::File(inst.clone())),
        (None, None) => {
            return Err(CliError::config(anyhow::anyhow!(
                "either --config or --instance is required"
            )))
        }
    };
    if let Some(inst) = a.instance {
        cfg.instance = InstanceSource::File(inst);
    }
    if let Some(v) = a.algorithms {
        cfg.algorithms = v;
    }
    if let Some(v) = a.seeds {
        cfg.seeds = v;
    }
    if a.alpha.is_some() {
        cfg.alpha = a.alpha;
    }
    if let Some(v) = a.penalty {
        cfg.penalty = v;
    }
    if let Some(v) = a.solver {
        cfg.solver = v;
    }
    if let Some(v) = a.out {
        cfg.output = v;
    }
    if let Some(v) = a.initial_mode {
        cfg.initial_mode = v;
    }
    cfg.trace |= a.trace;
    cfg.validate()
        .map_err(|e| CliError::config(anyhow::anyhow!(e)))?;

    let inst = pipeline::resolve_instance(&cfg.instance)?;
    let exec = if a.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let report = pipeline::run_experiment(&cfg, &inst, exec)?;
    print_summary(&report.rows);
    match report.failures.first() {
        None => Ok(()),
        Some(f) => Err(CliError {
            code: f.exit_code,
            error: anyhow::anyhow!(
                "{} algorithm(s) failed; see {}",
                report.failures.len(),
                cfg.output.join("failures.json").display()
            ),
        }),
    }
}

fn cmd_solve(a: SolveArgs) -> CliResult<()> {
    let inst = pipeline::load(&a.instance)?;
    let objective = match a.objective {
        ObjectiveArg::Maxmin => Objective::MaxMin,
        ObjectiveArg::Mincost => Objective::MinCost,
    };
    if !(a.time_limit.is_finite() && a.time_limit > 0.0) {
        return Err(CliError::config(anyhow::anyhow!(
            "time limit must be positive"
        )));
    }
    let out = a.out.clone();
    let settings = OfflineSettings {
        penalty: a.penalty.value(),
        alpha_form: match a.alpha_form {
            AlphaFormArg::Cumulative => AlphaForm::Cumulative,
            AlphaFormArg::PerRequest => AlphaForm::PerRequest,
        },
        initial_mode: a.initial_mode,
        solver: a.solver,
        limits: SolveLimits {
            max_nodes: a.max_nodes,
            time: Duration::from_secs_f64(a.time_limit),
        },
        workdir: out
            .clone()
            .unwrap_or_else(std::env::temp_dir)
            .join("solver"),
    };
    let config = pipeline::milp_config(objective, a.alpha, &settings);

    if let Some(path) = &a.export {
        let net = kfood::flownet::build_network(&inst).map_err(CliError::instance)?;
        let model = kfood::offline::build_flow_milp(&net, &config).map_err(CliError::config)?;
        fs::write(path, export_lp(&model))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::io)?;
        if a.export_only {
            return Ok(());
        }
    }

    let run = pipeline::solve_offline(&inst, &config, &settings)?;
    if let Some(path) = &a.solution {
        let net = kfood::flownet::build_network(&inst).map_err(CliError::instance)?;
        let model = kfood::offline::build_flow_milp(&net, &config).map_err(CliError::config)?;
        fs::write(path, write_solution(&model, &run.solution))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::io)?;
    }
    let name = match (objective, a.alpha) {
        (Objective::MinCost, _) => Algorithm::MinCost,
        (Objective::MaxMin, None) => Algorithm::FlowMilp,
        (Objective::MaxMin, Some(_)) => Algorithm::FlowMilp2s,
    }
    .name();
    if let Some(dir) = &out {
        pipeline::write_algorithm_outputs(&dir.join(name), &run.metrics, &[])?;
    }
    println!("status,{}", run.solution.status.as_str());
    println!("objective,{:.6}", run.solution.objective_value);
    print_summary(&[SummaryRow::new(name, &run.metrics)]);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let inst = pipeline::load(&a.instance)?;
    let mut policies = a.policies.unwrap_or_else(|| Policy::ALL.to_vec());
    policies.sort_by_key(|p| p.name());
    policies.dedup();
    let seeds = a.seeds.unwrap_or_else(default_seeds);
    if seeds.is_empty() {
        return Err(CliError::config(anyhow::anyhow!("seed list is empty")));
    }
    if a.trace && a.out.is_none() {
        return Err(CliError::config(anyhow::anyhow!("--trace needs --out")));
    }
    let mut rows = Vec::new();
    for p in policies {
        let run = pipeline::run_online(&inst, p, &seeds, a.trace, Exec::Parallel)?;
        if let Some(dir) = &a.out {
            pipeline::write_algorithm_outputs(&dir.join(p.name()), &run.metrics, &run.traces)?;
        }
        rows.push(SummaryRow::new(p.name(), &run.metrics));
    }
    if let Some(dir) = &a.out {
        fs::write(dir.join("metrics.csv"), pipeline::summary_csv(&rows)).map_err(CliError::io)?;
    }
    print_summary(&rows);
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult<()> {
    let rows = pipeline::reaggregate(&a.out)?;
    if rows.is_empty() {
        return Err(CliError::config(anyhow::anyhow!(
            "no per-algorithm results under {}",
            a.out.display()
        )));
    }
    fs::write(a.out.join("metrics.csv"), pipeline::summary_csv(&rows)).map_err(CliError::io)?;
    print_summary(&rows);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Run(a) => cmd_run(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
