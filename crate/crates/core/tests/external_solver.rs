use std::path::PathBuf;
use std::process::Command;

use kfood::flownet::build_network;
use kfood::instance::gen_partition_instance;
use kfood::offline::{
    build_flow_milp, solve_embedded, solve_external, verify_solution, write_solution,
    ExternalError, InitialMode, MilpConfig, Objective, ParseSolutionError, SolveLimits,
};

fn fixed_maxmin() -> MilpConfig {
    MilpConfig {
        initial_mode: InitialMode::Fixed,
        ..Default::default()
    }
}

/// A fake solver that copies a prepared solution file and prints its name.
fn canned_solver(dir: &std::path::Path, solution: &str) -> String {
    std::fs::write(dir.join("canned.sol"), solution).unwrap();
    let script = dir.join("solver.sh");
    std::fs::write(
        &script,
        "#!/bin/sh\necho working on \"$1\"\necho canned.sol\n",
    )
    .unwrap();
    format!("sh {}", script.display())
}

#[test]
fn canned_solution_round_trips() {
    let inst = gen_partition_instance(&[1, 2, 3], 2, 2).unwrap();
    let net = build_network(&inst).unwrap();
    let model = build_flow_milp(&net, &fixed_maxmin()).unwrap();
    let embedded = solve_embedded(&model, SolveLimits::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let cmd = canned_solver(dir.path(), &write_solution(&model, &embedded));
    let parsed = solve_external(&model, &cmd, dir.path()).unwrap();
    assert!(dir.path().join("model.lp").exists());
    assert!((parsed.objective_value - embedded.objective_value).abs() < 1e-9);
    assert!(verify_solution(&net, &model, &parsed).is_feasible(1e-6));
}

#[test]
fn infeasible_external_point_is_rejected() {
    let inst = gen_partition_instance(&[1, 2], 1, 2).unwrap();
    let net = build_network(&inst).unwrap();
    let model = build_flow_milp(&net, &fixed_maxmin()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    // every variable at zero breaks the unit-supply rows
    let cmd = canned_solver(dir.path(), "# Status Optimal\n# Objective value = 0\n");
    match solve_external(&model, &cmd, dir.path()) {
        Err(ExternalError::Parse(ParseSolutionError::ResidualTooLarge { .. })) => {}
        other => panic!("expected a residual error, got {other:?}"),
    }
}

#[test]
fn missing_and_failing_commands() {
    let inst = gen_partition_instance(&[1], 1, 1).unwrap();
    let net = build_network(&inst).unwrap();
    let model = build_flow_milp(&net, &fixed_maxmin()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        solve_external(&model, "definitely-not-a-solver-binary", dir.path()),
        Err(ExternalError::Spawn { .. })
    ));
    assert!(matches!(
        solve_external(&model, "  ", dir.path()),
        Err(ExternalError::EmptyCommand)
    ));
    assert!(matches!(
        solve_external(&model, "false", dir.path()),
        Err(ExternalError::Failed { .. })
    ));
    assert!(matches!(
        solve_external(&model, "true", dir.path()),
        Err(ExternalError::NoSolutionPath)
    ));
}

#[test]
fn highs_agrees_with_embedded_when_available() {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tools/highs_solve.py");
    let has_scipy = Command::new("python3")
        .args(["-c", "import scipy.optimize"])
        .output()
        .is_ok_and(|o| o.status.success());
    if !has_scipy {
        eprintln!("python3 with scipy not found; skipping HiGHS comparison");
        return;
    }
    let cmd = format!("python3 {}", script.display());
    let inst = gen_partition_instance(&[1, 2, 3], 2, 1).unwrap();
    let net = build_network(&inst).unwrap();
    for config in [
        fixed_maxmin(),
        MilpConfig {
            objective: Objective::MinCost,
            ..fixed_maxmin()
        },
        MilpConfig {
            alpha: Some(1.2),
            ..fixed_maxmin()
        },
    ] {
        let model = build_flow_milp(&net, &config).unwrap();
        let embedded = solve_embedded(&model, SolveLimits::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let external = solve_external(&model, &cmd, dir.path()).unwrap();
        assert!((external.objective_value - embedded.objective_value).abs() < 1e-6);
        assert!(verify_solution(&net, &model, &external).is_feasible(1e-6));
    }
}
