use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kfood(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfood"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kfood(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn star(dir: &Path) -> PathBuf {
    ok(
        dir,
        &["gen", "star", "--d", "1,2,3", "--k", "2", "-o", "star.json"],
    );
    dir.join("star.json")
}

fn syn(dir: &Path) -> PathBuf {
    ok(
        dir,
        &[
            "gen",
            "syn",
            "--nodes",
            "25",
            "--p",
            "0.3",
            "--requests",
            "15",
            "--k",
            "4",
            "--seed",
            "3",
            "--speed",
            "10",
            "-o",
            "syn.json",
        ],
    );
    dir.join("syn.json")
}

/// Rows of a summary table keyed by algorithm.
fn rows(csv: &str) -> Vec<(String, Vec<f64>)> {
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,unserved,cost,min_reward,zero_count")
    );
    lines
        .map(|l| {
            let mut cells = l.split(',');
            let name = cells.next().unwrap().to_string();
            (name, cells.map(|c| c.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn gen_writes_loadable_instances() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(star(dir.path())).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["k"], 2);
    assert_eq!(v["metric"]["nodes"], 4);

    let stdout = ok(
        dir.path(),
        &[
            "gen",
            "syn",
            "--nodes",
            "12",
            "--p",
            "0.5",
            "--requests",
            "6",
            "--k",
            "2",
            "--seed",
            "9",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["requests"].as_array().unwrap().len(), 6);
    assert_eq!(
        stdout,
        ok(
            dir.path(),
            &[
                "gen",
                "syn",
                "--nodes",
                "12",
                "--p",
                "0.5",
                "--requests",
                "6",
                "--k",
                "2",
                "--seed",
                "9"
            ]
        )
    );
}

#[test]
fn gen_from_order_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("g.json"),
        r#"{"nodes": 3, "edges": [[0, 1, 2], [1, 2, 3]]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("orders.csv"),
        "order_id,source_node,dest_node,arrival_ts,pickup_deadline_ts\n7,0,2,0,10\n8,2,1,4,12\n",
    )
    .unwrap();
    let stdout = ok(
        dir.path(),
        &[
            "gen",
            "csv",
            "--input",
            "orders.csv",
            "--graph",
            "g.json",
            "--k",
            "2",
            "--seed",
            "1",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["requests"].as_array().unwrap().len(), 2);
}

#[test]
fn run_writes_summary_curves_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    syn(dir.path());
    let stdout = ok(dir.path(), &["run", "--instance", "syn.json", "--out", "a"]);
    let table = rows(&stdout);
    let names: Vec<_> = table.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "doc4food",
            "greedy-min",
            "min-delta",
            "random",
            "round-robin"
        ]
    );
    for (name, _) in &table {
        let curve = fs::read_to_string(dir.path().join("a").join(name).join("lorenz.csv")).unwrap();
        assert!(curve.starts_with("pop_share,reward_share\n0.000000,0.000000\n"));
        assert_eq!(curve.lines().count(), 2 + 4);
        assert!(curve.trim_end().ends_with("1.000000,1.000000"));
    }
    assert_eq!(
        fs::read_to_string(dir.path().join("a/metrics.csv")).unwrap(),
        stdout
    );

    ok(
        dir.path(),
        &[
            "run",
            "--instance",
            "syn.json",
            "--out",
            "b",
            "--sequential",
        ],
    );
    for file in [
        "metrics.csv",
        "random/metrics.csv",
        "doc4food/lorenz.csv",
        "min-delta/metrics.csv",
    ] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap(),
            "{file} differs between runs"
        );
    }
}

#[test]
fn offline_rows_on_a_star() {
    let dir = tempfile::tempdir().unwrap();
    star(dir.path());
    let stdout = ok(
        dir.path(),
        &[
            "run",
            "--instance",
            "star.json",
            "--algorithms",
            "flow-milp,min-cost,flow-milp-2s",
            "--alpha",
            "1.5",
            "--out",
            "o",
        ],
    );
    let table = rows(&stdout);
    assert_eq!(table.len(), 3);
    for (name, v) in &table {
        assert_eq!(v[0], 0.0, "{name} left requests unserved");
    }
    let flow = &table.iter().find(|(n, _)| n == "flow-milp").unwrap().1;
    // two servers split the star evenly
    assert_eq!(flow[1], flow[2]);
    let two_stage = &table.iter().find(|(n, _)| n == "flow-milp-2s").unwrap().1;
    assert!(two_stage[2] <= flow[2] + 1e-6);
    let min_cost = &table.iter().find(|(n, _)| n == "min-cost").unwrap().1;
    assert!(min_cost[1] <= two_stage[1] + 1e-6);
    assert!(!dir.path().join("o/failures.json").exists());
}

#[test]
fn missing_external_solver_is_reported_not_tabled() {
    let dir = tempfile::tempdir().unwrap();
    star(dir.path());
    let out = kfood(
        dir.path(),
        &[
            "run",
            "--instance",
            "star.json",
            "--algorithms",
            "flow-milp,greedy-min",
            "--solver",
            "external:no-such-solver-anywhere",
            "--out",
            "o",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let table = rows(&fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap());
    assert_eq!(
        table.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        ["greedy-min"]
    );
    let failures: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/failures.json")).unwrap())
            .unwrap();
    assert_eq!(failures[0]["algorithm"], "flow-milp");
    assert_eq!(failures[0]["exit_code"], 3);
    assert!(failures[0]["error"]
        .as_str()
        .unwrap()
        .contains("no-such-solver-anywhere"));

    // a clean rerun clears the stale manifest
    ok(
        dir.path(),
        &[
            "run",
            "--instance",
            "star.json",
            "--algorithms",
            "greedy-min",
            "--out",
            "o",
        ],
    );
    assert!(!dir.path().join("o/failures.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    star(dir.path());
    fs::write(dir.path().join("bad.json"), r#"{"version": 1, "k": 0}"#).unwrap();
    assert_eq!(
        kfood(dir.path(), &["run", "--instance", "bad.json"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        kfood(dir.path(), &["simulate", "--instance", "missing.json"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        kfood(
            dir.path(),
            &[
                "run",
                "--instance",
                "star.json",
                "--algorithms",
                "flow-milp-2s"
            ]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        kfood(
            dir.path(),
            &["run", "--instance", "star.json", "--algorithms", "simplex"]
        )
        .status
        .code(),
        Some(2)
    );
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"instance": {"file": "star.json"}, "colour": "red"}"#,
    )
    .unwrap();
    assert_eq!(
        kfood(dir.path(), &["run", "--config", "cfg.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(kfood(dir.path(), &["run"]).status.code(), Some(2));
}

#[test]
fn config_file_with_generated_instance() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"instance": {"generate": {"kind": "star", "d": [2, 2], "k": 2}},
            "algorithms": ["FlowMILP", "GreedyMin"], "seeds": [4], "output": "res"}"#,
    )
    .unwrap();
    let table = rows(&ok(dir.path(), &["run", "--config", "cfg.json"]));
    assert_eq!(table.len(), 2);
    assert!(dir.path().join("res/flow-milp/lorenz.csv").exists());
}

#[test]
fn trace_files_are_ndjson() {
    let dir = tempfile::tempdir().unwrap();
    syn(dir.path());
    ok(
        dir.path(),
        &[
            "simulate",
            "--instance",
            "syn.json",
            "--policies",
            "doc4food,random",
            "--seeds",
            "1,2",
            "--trace",
            "--out",
            "t",
        ],
    );
    assert!(dir.path().join("t/random/trace_seed2.ndjson").exists());
    let text = fs::read_to_string(dir.path().join("t/doc4food/trace_seed1.ndjson")).unwrap();
    let mut last = f64::NEG_INFINITY;
    let mut arrivals = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let ts = v["ts"].as_f64().unwrap();
        assert!(ts >= last);
        last = ts;
        arrivals += (v["event"] == "arrive") as usize;
    }
    assert_eq!(arrivals, 15);
}

#[test]
fn report_reaggregates_existing_results() {
    let dir = tempfile::tempdir().unwrap();
    syn(dir.path());
    let original = ok(dir.path(), &["run", "--instance", "syn.json", "--out", "o"]);
    fs::remove_file(dir.path().join("o/metrics.csv")).unwrap();
    fs::remove_dir_all(dir.path().join("o/random")).unwrap();
    let rebuilt = ok(dir.path(), &["report", "--out", "o"]);
    let expected: Vec<_> = original
        .lines()
        .filter(|l| !l.starts_with("random,"))
        .collect();
    assert_eq!(rebuilt.lines().collect::<Vec<_>>(), expected);
    assert_eq!(
        fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap(),
        rebuilt
    );
    assert_eq!(
        kfood(dir.path(), &["report", "--out", "nowhere"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn solve_exports_model_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    star(dir.path());
    ok(
        dir.path(),
        &[
            "solve",
            "--instance",
            "star.json",
            "--export",
            "m.lp",
            "--export-only",
        ],
    );
    let lp = fs::read_to_string(dir.path().join("m.lp")).unwrap();
    assert!(lp.contains("Maximize") && lp.trim_end().ends_with("End"));

    let stdout = ok(
        dir.path(),
        &[
            "solve",
            "--instance",
            "star.json",
            "--objective",
            "mincost",
            "--solution",
            "s.txt",
            "--out",
            "o",
        ],
    );
    assert!(stdout.starts_with("status,Optimal\n"));
    assert!(fs::read_to_string(dir.path().join("s.txt"))
        .unwrap()
        .contains("Objective"));
    assert!(dir.path().join("o/min-cost/metrics.csv").exists());
}
