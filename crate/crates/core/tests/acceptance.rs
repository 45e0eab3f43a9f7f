//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use kfood::flownet::{build_network, EdgeKind, TimeExpandedNetwork};
use kfood::instance::{
    gen_partition_instance, gen_synthetic, gen_tiny, SyntheticParams, TinyLimits,
};
use kfood::metric::gen_erdos_renyi;
use kfood::metrics::{evaluate, evaluate_simulation, lorenz_curve};
use kfood::offline::{
    brute_force_oracle, build_flow_milp, default_penalty, solve_embedded, solve_external,
    verify_solution, AlphaForm, InitialMode, MilpConfig, MilpModel, Objective, RowKind, Solution,
    SolveLimits, SolveStatus,
};
use kfood::online::{
    simulate, simulate_with, EventKind, NearestTarget, Policy, Position, SimOptions,
    SimulationResult,
};
use kfood::{Instance, Time};

const RESIDUAL_TOL: f64 = 1e-6;
const EQUAL_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixed(objective: Objective) -> MilpConfig {
    MilpConfig {
        objective,
        initial_mode: InitialMode::Fixed,
        ..Default::default()
    }
}

fn solve(net: &TimeExpandedNetwork<'_>, config: &MilpConfig) -> (MilpModel, Solution) {
    let model = build_flow_milp(net, config).expect("valid config");
    let sol = solve_embedded(&model, SolveLimits::default()).expect("embedded solve");
    (model, sol)
}

fn tiny_seeds() -> std::ops::Range<u64> {
    1000..1060
}

fn criterion_1() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for seed in tiny_seeds() {
        let inst = gen_tiny(seed, TinyLimits::default());
        let oracle = brute_force_oracle(&inst).expect("tiny instance within guard rails");
        let net = build_network(&inst).expect("network");
        let p = default_penalty(&inst);

        let (model, sol) = solve(&net, &fixed(Objective::MaxMin));
        let rep = verify_solution(&net, &model, &sol);
        let unserved = sol.unserved_count();
        let maxmin = sol.min_reward.unwrap_or(f64::NAN);
        // fewer unserved dominates; on a tie the maxmin must dominate
        let dominates = sol.status == SolveStatus::Optimal
            && (unserved < oracle.maxmin_unserved
                || (unserved == oracle.maxmin_unserved
                    && maxmin >= oracle.best_maxmin as f64 - 1e-6));
        if !dominates || !rep.violations.is_empty() {
            failures.push(format!(
                "seed {seed} maxmin: milp ({unserved}, {maxmin}) oracle ({}, {}) violations {}",
                oracle.maxmin_unserved,
                oracle.best_maxmin,
                rep.violations.len()
            ));
        }

        let (model, sol) = solve(&net, &fixed(Objective::MinCost));
        let rep = verify_solution(&net, &model, &sol);
        let oracle_total = oracle.best_mincost as f64 + p * oracle.mincost_unserved as f64;
        if sol.status != SolveStatus::Optimal
            || sol.objective_value > oracle_total + 1e-6
            || !rep.violations.is_empty()
        {
            failures.push(format!(
                "seed {seed} mincost: milp {} oracle {oracle_total}",
                sol.objective_value
            ));
        }
        checked += 1;
    }
    let seeds = tiny_seeds();
    outcome(
        failures.is_empty(),
        format!(
            "{checked} tiny instances (seeds {}..{}), {} failures{}",
            seeds.start,
            seeds.end,
            failures.len(),
            failures
                .first()
                .map(|f| format!("; first: {f}"))
                .unwrap_or_default()
        ),
    )
}

fn highs_command() -> Option<String> {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tools/highs_solve.py");
    let ok = Command::new("python3")
        .args(["-c", "import scipy.optimize, numpy"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    (ok && script.exists()).then(|| format!("python3 {}", script.display()))
}

fn residual_configs() -> Vec<(&'static str, MilpConfig)> {
    vec![
        ("maxmin-fixed", fixed(Objective::MaxMin)),
        ("maxmin-free", MilpConfig::default()),
        ("mincost-fixed", fixed(Objective::MinCost)),
        (
            "mincost-free",
            MilpConfig {
                objective: Objective::MinCost,
                ..Default::default()
            },
        ),
        (
            "2s-cumulative",
            MilpConfig {
                alpha: Some(1.5),
                ..fixed(Objective::MaxMin)
            },
        ),
        (
            "2s-per-request",
            MilpConfig {
                alpha: Some(2.0),
                alpha_form: AlphaForm::PerRequest,
                ..fixed(Objective::MaxMin)
            },
        ),
    ]
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut solutions = 0;
    let mut failures = Vec::new();
    for seed in tiny_seeds().take(30) {
        let inst = gen_tiny(seed, TinyLimits::default());
        let net = build_network(&inst).unwrap();
        for (label, config) in residual_configs() {
            let (model, sol) = solve(&net, &config);
            if sol.status != SolveStatus::Optimal {
                failures.push(format!(
                    "embedded seed {seed} {label}: status {}",
                    sol.status.as_str()
                ));
                continue;
            }
            let rep = verify_solution(&net, &model, &sol);
            worst = worst.max(rep.max_residual);
            solutions += 1;
            if !rep.is_feasible(RESIDUAL_TOL) {
                failures.push(format!(
                    "embedded seed {seed} {label}: {:?}",
                    rep.violations.first()
                ));
            }
        }
    }

    let mut external = 0;
    let mut note = String::from("external solver unavailable (python3 + scipy)");
    if let Some(cmd) = highs_command() {
        for seed in tiny_seeds().take(10) {
            let inst = gen_tiny(seed, TinyLimits::default());
            let net = build_network(&inst).unwrap();
            for (label, config) in residual_configs() {
                let (model, embedded) = solve(&net, &config);
                let dir = tempfile::tempdir().unwrap();
                match solve_external(&model, &cmd, dir.path()) {
                    Ok(sol) => {
                        let rep = verify_solution(&net, &model, &sol);
                        worst = worst.max(rep.max_residual);
                        external += 1;
                        if !rep.is_feasible(RESIDUAL_TOL) {
                            failures.push(format!(
                                "external seed {seed} {label}: {:?}",
                                rep.violations.first()
                            ));
                        }
                        let gap = (sol.objective_value - embedded.objective_value).abs();
                        if gap > 1e-6 * (1.0 + embedded.objective_value.abs()) {
                            failures.push(format!(
                                "external seed {seed} {label}: objective {} vs embedded {}",
                                sol.objective_value, embedded.objective_value
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("external seed {seed} {label}: {e}")),
                }
            }
        }
        note = format!("{external} external solutions also agree on objective");
    }
    outcome(
        failures.is_empty(),
        format!(
            "{solutions} embedded solutions, max residual {worst:.2e} (tol {RESIDUAL_TOL:e}); {note}{}",
            failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Outcome {
    // Each server's requests are served as a chain from the centre: out and
    // back for all but the last, so a chain earns 2*sum(d) - d_last.
    let cases: &[(&[u64], usize, u64)] = &[
        (&[2, 2], 2, 2),
        (&[1, 2, 3], 2, 3),
        (&[3, 3, 3, 3], 2, 9),
        (&[1, 1, 1], 3, 1),
        (&[4, 4, 4, 4, 4, 4], 3, 12),
        (&[2, 1, 1], 2, 2),
        (&[1, 2], 1, 4),
    ];
    let mut failures = Vec::new();
    for &(d, k, expected) in cases {
        let inst = gen_partition_instance(d, k, 3).unwrap();
        let res = brute_force_oracle(&inst).unwrap();
        if res.best_maxmin != expected || res.maxmin_unserved != 0 {
            failures.push(format!(
                "{d:?} k={k}: oracle {} expected {expected}",
                res.best_maxmin
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} hand-derived partition optima{}",
            cases.len(),
            failures
                .first()
                .map(|f| format!("; {f}"))
                .unwrap_or_default()
        ),
    )
}

struct Trends {
    seeds: u32,
    doc_serves_more: u32,
    doc_beats_rr: u32,
    greedy_beats_random: u32,
    doc_beats_random: u32,
    all_min_zero: u32,
}

fn trend_counts(speed: f64) -> Trends {
    let seeds = 20u64;
    let mut t = Trends {
        seeds: seeds as u32,
        doc_serves_more: 0,
        doc_beats_rr: 0,
        greedy_beats_random: 0,
        doc_beats_random: 0,
        all_min_zero: 0,
    };
    for seed in 0..seeds {
        let metric = gen_erdos_renyi(500, 0.5, 10..=10_000, 40_000 + seed).unwrap();
        let params = SyntheticParams {
            speed,
            ..Default::default()
        };
        let inst = gen_synthetic(metric, &params, 50_000 + seed).unwrap();
        let run = |p: Policy, s: u64| evaluate_simulation(&simulate(&inst, p, s).unwrap());
        let greedy = run(Policy::GreedyMin, 0);
        let doc = run(Policy::Doc4Food, 0);
        let rr = run(Policy::RoundRobin, 0);
        // Random is averaged over 5 runs
        let random_min = (0..5)
            .map(|s| run(Policy::Random, 100 * seed + s).min_reward)
            .sum::<f64>()
            / 5.0;
        t.doc_serves_more += (doc.unserved <= greedy.unserved) as u32;
        t.doc_beats_rr += (doc.min_reward > rr.min_reward) as u32;
        t.greedy_beats_random += (greedy.min_reward > random_min) as u32;
        t.doc_beats_random += (doc.min_reward > random_min) as u32;
        t.all_min_zero += (greedy.min_reward == 0.0
            && doc.min_reward == 0.0
            && rr.min_reward == 0.0
            && random_min == 0.0) as u32;
    }
    t
}

fn criterion_4() -> Outcome {
    let t = trend_counts(1.0);
    let n = t.seeds;
    let frac = |x: u32| x as f64 / n as f64;
    let pass_a = frac(t.doc_serves_more) >= 0.6;
    let pass_b = frac(t.doc_beats_rr) >= 0.9;
    let pass_c = frac(t.greedy_beats_random) >= 0.6 && frac(t.doc_beats_random) >= 0.6;
    let fast = trend_counts(10.0);
    outcome(
        pass_a && pass_b && pass_c,
        format!(
            "{n} SynSparse-style seeds at speed 1: (a) doc4food unserved <= greedy-min {}/{n} [{}]; \
             (b) doc4food min > round-robin {}/{n} [{}]; \
             (c) greedy-min min > random {}/{n}, doc4food min > random {}/{n} [{}]; \
             every policy has min reward 0 on {}/{n} seeds. \
             Diagnostic, speed 10: (a) {}/{n} (b) {}/{n} (c) {}/{n}, {}/{n}",
            t.doc_serves_more,
            if pass_a { "ok" } else { "below 60%" },
            t.doc_beats_rr,
            if pass_b { "ok" } else { "below 90%" },
            t.greedy_beats_random,
            t.doc_beats_random,
            if pass_c { "ok" } else { "below 60%" },
            t.all_min_zero,
            fast.doc_serves_more,
            fast.doc_beats_rr,
            fast.greedy_beats_random,
            fast.doc_beats_random,
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut instances: Vec<Instance> = tiny_seeds()
        .map(|s| gen_tiny(s, TinyLimits::default()))
        .collect();
    for (d, k) in [
        (&[2u64, 2][..], 2),
        (&[3, 3, 3, 3], 2),
        (&[1, 1, 1], 3),
        (&[2, 1, 1], 2),
    ] {
        instances.push(gen_partition_instance(d, k, 3).unwrap());
    }
    let mut certified = 0;
    let mut failures = Vec::new();
    for (idx, inst) in instances.iter().enumerate() {
        let oracle = brute_force_oracle(inst).unwrap();
        if !oracle.equal_split {
            continue;
        }
        certified += 1;
        let net = build_network(inst).unwrap();
        let (_, sol) = solve(&net, &fixed(Objective::MaxMin));
        let spread = sol.rewards.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - sol.rewards.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let m = evaluate(
            &sol.rewards.iter().map(|x| x.max(0.0)).collect::<Vec<_>>(),
            sol.unserved_count(),
        );
        if spread > EQUAL_TOL || (m.cost - m.min_reward).abs() > EQUAL_TOL {
            failures.push(format!(
                "instance {idx}: spread {spread:e}, cost {} min {}",
                m.cost, m.min_reward
            ));
        }
    }
    outcome(
        failures.is_empty() && certified > 0,
        format!(
            "{certified} of {} instances certified equal-split; reward spread <= {EQUAL_TOL:e} on all{}",
            instances.len(),
            failures.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_6() -> Outcome {
    let alphas = [1e6, 10.0, 5.0, 3.0, 2.0, 1.5, 1.2];
    let mut instances = vec![gen_partition_instance(&[1, 2, 3], 2, 1).unwrap()];
    instances.extend((0..5).map(|s| gen_tiny(2000 + s, TinyLimits::default())));
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (idx, inst) in instances.iter().enumerate() {
        let net = build_network(inst).unwrap();
        let (_, plain) = solve(&net, &fixed(Objective::MaxMin));
        let mut prev: Option<(f64, f64)> = None;
        let mut series = Vec::new();
        for (step, &alpha) in alphas.iter().enumerate() {
            let (_, sol) = solve(
                &net,
                &MilpConfig {
                    alpha: Some(alpha),
                    ..fixed(Objective::MaxMin)
                },
            );
            if sol.status != SolveStatus::Optimal {
                failures.push(format!(
                    "instance {idx}: alpha {alpha} status {}",
                    sol.status.as_str()
                ));
                continue;
            }
            let m = evaluate(
                &sol.rewards.iter().map(|x| x.max(0.0)).collect::<Vec<_>>(),
                0,
            );
            series.push(format!("{alpha}:{:.3}/{:.3}", m.cost, m.min_reward));
            if step == 0 && (sol.objective_value - plain.objective_value).abs() > 1e-6 {
                failures.push(format!(
                    "instance {idx}: alpha {alpha} objective {} vs plain {}",
                    sol.objective_value, plain.objective_value
                ));
            }
            if let Some((pc, pm)) = prev {
                if m.cost > pc + 1e-6 || m.min_reward > pm + 1e-6 {
                    failures.push(format!(
                        "instance {idx}: alpha {alpha} raised cost/min to {}/{} from {pc}/{pm}",
                        m.cost, m.min_reward
                    ));
                }
            }
            prev = Some((m.cost, m.min_reward));
        }
        rows.push(series.join(" "));
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} instances, alpha {alphas:?}; first series (cost/min) {}{}",
            instances.len(),
            rows[0],
            failures
                .first()
                .map(|f| format!("; {f}"))
                .unwrap_or_default()
        ),
    )
}

/// Approach edges counted straight from the metric: every location whose
/// travel time to the source fits the window, plus the co-located one.
fn expected_approaches(inst: &Instance) -> usize {
    inst.requests
        .iter()
        .map(|r| {
            1 + (0..inst.metric.node_count())
                .filter(|&h| h != r.source && inst.travel_time(h, r.source) <= r.t_end - r.t_begin)
                .count()
        })
        .sum()
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_var_ratio: f64 = 0.0;
    let mut worst_row_ratio: f64 = 0.0;
    let limits = TinyLimits {
        max_nodes: 8,
        max_requests: 8,
        max_servers: 3,
        horizon: 40,
        ..Default::default()
    };
    for seed in 0..10u64 {
        let inst = gen_tiny(3000 + seed, limits);
        let net = build_network(&inst).unwrap();
        let (m, n, k) = (inst.metric.node_count(), inst.requests.len(), inst.k);
        let layers = (inst.horizon / inst.eta) as usize + 1;
        let starts: BTreeSet<_> = inst.initial_positions.iter().collect();

        let edges = 2 * m + m * (layers - 1) + expected_approaches(&inst) + n;
        let vars = edges * k + n + k + 1;
        let rows = 2 * k + 2 * n + (m * layers + n) * k + 2 + k + starts.len();
        let model = build_flow_milp(&net, &fixed(Objective::MaxMin)).unwrap();
        if net.edges.len() != edges || model.var_count() != vars || model.row_count() != rows {
            failures.push(format!(
                "seed {seed}: edges {}/{edges} vars {}/{vars} rows {}/{rows}",
                net.edges.len(),
                model.var_count(),
                model.row_count()
            ));
        }
        if net.count_edges(EdgeKind::Delivery) != n
            || model.count_rows(|r| matches!(r, RowKind::Conservation { .. }))
                != (m * layers + n) * k
        {
            failures.push(format!("seed {seed}: delivery or conservation count"));
        }
        let with_alpha = build_flow_milp(
            &net,
            &MilpConfig {
                alpha: Some(1.2),
                ..fixed(Objective::MaxMin)
            },
        )
        .unwrap();
        if with_alpha.row_count() != rows + 1 {
            failures.push(format!("seed {seed}: alpha row"));
        }

        let var_bound = (m * k * (n + layers)) as f64;
        let row_bound = ((n + m) * k * layers) as f64;
        worst_var_ratio = worst_var_ratio.max(model.var_count() as f64 / var_bound);
        worst_row_ratio = worst_row_ratio.max(model.row_count() as f64 / row_bound);
    }
    let bounded = worst_var_ratio <= 4.0 && worst_row_ratio <= 4.0;
    outcome(
        failures.is_empty() && bounded,
        format!(
            "10 instances match exact counts; vars <= {worst_var_ratio:.2}*m*k*(n+T), rows <= {worst_row_ratio:.2}*(n+m)*k*T (limit 4){}",
            failures.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn check_run(inst: &Instance, res: &SimulationResult) -> Result<(), String> {
    let granted: u64 = res.per_request.iter().map(|r| r.reward).sum();
    let total: u64 = res.per_server.iter().map(|s| s.reward).sum();
    let mut anchors = inst.initial_positions.clone();
    let mut recomputed = 0u64;
    let mut busy: Vec<Vec<(Time, Time)>> = vec![Vec::new(); inst.k];
    for rec in &res.per_request {
        let Some(s) = rec.server else { continue };
        let r = &inst.requests[rec.request];
        recomputed += inst.dist(anchors[s], r.source) + inst.dist(r.source, r.dest);
        anchors[s] = r.dest;
        if rec.pickup.unwrap() > r.t_end {
            return Err(format!("request {} picked up late", r.id));
        }
        busy[s].push((rec.assigned_at.unwrap(), rec.delivery.unwrap()));
    }
    if granted != total || recomputed != total {
        return Err(format!(
            "reward accounting {granted} / {recomputed} / {total}"
        ));
    }
    for (s, iv) in busy.iter().enumerate() {
        if iv.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(format!("server {s} overlaps"));
        }
    }
    let rewards: Vec<f64> = res.per_server.iter().map(|s| s.reward as f64).collect();
    let curve = lorenz_curve(&rewards);
    if curve
        .windows(2)
        .any(|w| w[1].reward_share < w[0].reward_share - 1e-12)
        || curve.windows(3).any(|w| {
            (w[2].reward_share - w[1].reward_share) - (w[1].reward_share - w[0].reward_share)
                < -1e-12
        })
    {
        return Err("lorenz curve not monotone convex".into());
    }
    Ok(())
}

/// Replays drift events: every step of an idle server shortens its distance
/// to the nearest source by exactly `speed * eta`, or lands on it.
fn check_drift(inst: &Instance, res: &SimulationResult) -> Result<usize, String> {
    let nearest = NearestTarget::new(&inst.metric, &inst.source_set());
    let budget = inst.speed * inst.eta as f64;
    let mut pos: Vec<Position> = inst
        .initial_positions
        .iter()
        .map(|&p| Position::Node(p))
        .collect();
    let mut steps = 0;
    for e in res.trace.as_ref().expect("trace enabled") {
        match e.event {
            EventKind::Assign => {
                let s = e.server.unwrap();
                pos[s] = Position::Node(inst.requests[e.request.unwrap()].dest);
            }
            EventKind::Drift => {
                let s = e.server.unwrap();
                let new = e.position.unwrap();
                let before = nearest.distance(&pos[s]).unwrap();
                let after = nearest.distance(&new).unwrap();
                let expected = (before - budget).max(0.0);
                if (after - expected).abs() > 1e-9 {
                    return Err(format!(
                        "server {s} at t={} moved {before} -> {after}",
                        e.ts
                    ));
                }
                pos[s] = new;
                steps += 1;
            }
            _ => {}
        }
    }
    Ok(steps)
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut drift_steps = 0;
    let limits = TinyLimits {
        max_nodes: 10,
        max_requests: 12,
        max_servers: 4,
        horizon: 80,
        max_weight: 7,
        max_prep: 12,
    };
    for seed in 0..100u64 {
        let mut inst = gen_tiny(4000 + seed, limits);
        if seed % 2 == 1 {
            inst.speed = 1.5;
        }
        for policy in Policy::ALL {
            let opts = SimOptions { trace: true };
            let a = simulate_with(&inst, policy, seed, opts).unwrap();
            let b = simulate_with(&inst, policy, seed, opts).unwrap();
            if a != b {
                failures.push(format!("seed {seed} {policy}: non-deterministic"));
            }
            if let Err(e) = check_run(&inst, &a) {
                failures.push(format!("seed {seed} {policy}: {e}"));
            }
            if policy == Policy::Doc4Food {
                match check_drift(&inst, &a) {
                    Ok(n) => drift_steps += n,
                    Err(e) => failures.push(format!("seed {seed} drift: {e}")),
                }
            }
        }
    }
    outcome(
        failures.is_empty() && drift_steps > 0,
        format!(
            "100 fuzzed instances x 5 policies; {drift_steps} drift steps replayed{}",
            failures
                .first()
                .map(|f| format!("; {f}"))
                .unwrap_or_default()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle-equivalence", criterion_1),
        ("constraint-residuals", criterion_2),
        ("partition-sanity", criterion_3),
        ("paper-trends", criterion_4),
        ("equal-reward-optimum", criterion_5),
        ("two-sided-tradeoff", criterion_6),
        ("model-size", criterion_7),
        ("simulation-invariants", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += (!o.pass) as usize;
        println!(
            "{verdict} {} {name} ({:.1}s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
