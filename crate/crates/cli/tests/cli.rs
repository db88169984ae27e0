//! End-to-end tests for the command-line binary, including the two
//! acceptance criteria that live on the CLI surface: the figure-1 grid scan
//! (criterion 13) and byte-identical reruns (criterion 14).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_routing-dynamics"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../games")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn criterion_13_fig1_grid_peaks_at_center() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.csv");
    let output = run(&[
        "region",
        "--mode",
        "fig1",
        "--game",
        fixture("canonical_stable.json").to_str().unwrap(),
        "--grid",
        "101x101",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("pi_1a,pi_2a,f,stable"));
    let mut best = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        let x: f64 = cells[0].parse().unwrap();
        let y: f64 = cells[1].parse().unwrap();
        let f: f64 = cells[2].parse().unwrap();
        if f > best.2 {
            best = (x, y, f);
        }
        rows += 1;
    }
    assert_eq!(rows, 101 * 101);
    assert_eq!(best.2, 0.0625, "max of f must be exactly 1/16");
    assert_eq!((best.0, best.1), (0.5, 0.5), "the 101-point grid hits the center");
    println!("criterion 13 PASS: fig1 grid max f = 0.0625 exactly at (0.5, 0.5)");
}

#[test]
fn criterion_14_identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let game = fixture("canonical_unstable.json");
    let game = game.to_str().unwrap();

    let mut artifacts: Vec<Vec<Vec<u8>>> = Vec::new();
    for round in 0..2 {
        let sub = dir.path().join(format!("round{round}"));
        fs::create_dir(&sub).unwrap();
        let analyze = sub.join("analyze.json");
        assert_exit(
            &run(&["analyze", "--game", game, "--seed", "7", "--out", analyze.to_str().unwrap()]),
            0,
        );
        let sim = sub.join("sim.json");
        let snaps = sub.join("snaps.csv");
        assert_exit(
            &run(&[
                "simulate",
                "--game",
                game,
                "--seed",
                "7",
                "--steps",
                "2000",
                "--snapshots",
                snaps.to_str().unwrap(),
                "--out",
                sim.to_str().unwrap(),
            ]),
            0,
        );
        let ode = sub.join("ode.csv");
        assert_exit(
            &run(&[
                "ode",
                "--game",
                game,
                "--x0",
                "0,0,0,0",
                "--t-max",
                "50",
                "--out",
                ode.to_str().unwrap(),
            ]),
            0,
        );
        artifacts.push(
            [analyze, sim, snaps, ode]
                .iter()
                .map(|p| fs::read(p).unwrap())
                .collect(),
        );
    }
    assert_eq!(artifacts[0], artifacts[1], "reruns must be byte-identical");
    println!("criterion 14 PASS: analyze/simulate/ode reruns byte-identical");
}

#[test]
fn missing_game_file_exits_2() {
    let output = run(&["analyze", "--game", "/nonexistent/game.json"]);
    assert_exit(&output, 2);
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    assert_exit(&run(&["analyze", "--game", path.to_str().unwrap()]), 2);
}

#[test]
fn unsorted_cost_ladder_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"num_players":2,"num_routes":2,"costs":[[3.0,1.0],[1.0,3.0]],"betas":[0.5,0.5]}"#,
    )
    .unwrap();
    assert_exit(&run(&["analyze", "--game", path.to_str().unwrap()]), 2);
}

#[test]
fn bad_schedule_exits_2() {
    let game = fixture("canonical_stable.json");
    let output = run(&[
        "simulate",
        "--game",
        game.to_str().unwrap(),
        "--steps",
        "10",
        "--schedule",
        "power:1,1,0.3",
    ]);
    assert_exit(&output, 2);
}

#[test]
fn heteroclinic_on_single_equilibrium_game_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("orbit");
    let output = run(&[
        "heteroclinic",
        "--game",
        fixture("canonical_stable.json").to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_exit(&output, 4);
}

#[test]
fn heteroclinic_writes_both_orbits_with_clean_audit() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("orbit");
    let output = run(&[
        "heteroclinic",
        "--game",
        fixture("canonical_unstable.json").to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let audit: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("audit JSON on stdout");
    assert_eq!(audit["violations"], 0);
    assert_eq!(audit["s_sign"], serde_json::json!([1, -1, -1, 1]));
    for suffix in ["_plus.csv", "_minus.csv"] {
        let path = dir.path().join(format!("orbit{suffix}"));
        let csv = fs::read_to_string(path).unwrap();
        assert!(csv.starts_with("t,x_1_1,x_1_2,x_2_1,x_2_2\n"));
        assert!(csv.lines().count() > 2);
    }
}

#[test]
fn analyze_reports_three_point_case_on_unstable_game() {
    let output = run(&[
        "analyze",
        "--game",
        fixture("canonical_unstable.json").to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed["case"], "c");
    let points = parsed["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    let stable: Vec<bool> = points.iter().map(|p| p["stable"].as_bool().unwrap()).collect();
    assert_eq!(stable, vec![true, false, true]);
    assert_eq!(parsed["unique_guaranteed"], false);
}

#[test]
fn analyze_general_path_finds_unique_rest_point() {
    let output = run(&["analyze", "--game", fixture("three_player.json").to_str().unwrap()]);
    assert_exit(&output, 0);
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let reports = parsed.as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["verdict"]["stable"], true);
}

#[test]
fn ode_trajectory_converges_to_symmetric_rest_point() {
    let output = run(&[
        "ode",
        "--game",
        fixture("canonical_stable.json").to_str().unwrap(),
        "--x0",
        "0,1,2,3",
    ]);
    assert_exit(&output, 0);
    let csv = String::from_utf8(output.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x_1_1,x_1_2,x_2_1,x_2_2"));
    let last = lines.last().unwrap();
    let cells: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    for v in &cells[1..] {
        assert!((v - 2.0).abs() < 1e-6, "final state {cells:?}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(summary["terminal_flag"], "converged");
}

#[test]
fn simulate_classifies_limit_on_stable_game() {
    let output = run(&[
        "simulate",
        "--game",
        fixture("canonical_stable.json").to_str().unwrap(),
        "--steps",
        "20000",
        "--schedule",
        "power:1,1,0.7",
        "--replications",
        "2",
        "--radius",
        "0.25",
    ]);
    assert_exit(&output, 0);
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let runs = parsed.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for run in runs {
        assert_eq!(run["classified_limit"], 0);
        let counts = run["route_counts"].as_array().unwrap();
        for row in counts {
            let total: u64 = row.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
            assert_eq!(total, 20000);
        }
    }
}

#[test]
fn region_fig4_marks_three_equilibria_inside_the_fold() {
    let output = run(&[
        "region",
        "--mode",
        "fig4",
        "--grid",
        "3x3",
        "--mu-range",
        "5:7",
        "--q-range",
        "-1.5:1.5",
    ]);
    assert_exit(&output, 0);
    let csv = String::from_utf8(output.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("mu,q,num_equilibria,psi_prime_at_symmetric,h_boundary")
    );
    let mut saw_three = false;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let q: f64 = cells[1].parse().unwrap();
        let n: usize = cells[2].parse().unwrap();
        let psi_prime: f64 = cells[3].parse().unwrap();
        let h: f64 = cells[4].parse().unwrap();
        // inside the boundary (|q| < h) the scan must report three
        // equilibria and a symmetric point with psi' > 1
        if q.abs() < h - 1e-9 {
            assert_eq!(n, 3, "line {line}");
            assert!(psi_prime > 1.0);
            saw_three = true;
        } else if q.abs() > h + 1e-9 {
            assert_eq!(n, 1, "line {line}");
            assert!(psi_prime < 1.0);
        }
    }
    assert!(saw_three);
}
