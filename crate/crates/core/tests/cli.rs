use std::path::Path;
use std::process::{Command, Output};

use limit_surface::harness::StudyReport;
use limit_surface::io::{read_dataset, read_model, read_rows, StableRow, TrajectoryRow};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limit-surface"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_fit_eval_invert_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--support",
        "legged",
        "--n",
        "80",
        "--noise",
        "0.05",
        "--seed",
        "3",
        "--split",
        "-o",
        s(&data),
    ]);
    for part in ["train", "validation", "test"] {
        let ds = read_dataset(&data.join(format!("{part}.csv"))).unwrap();
        assert!(!ds.is_empty());
        assert_eq!(ds.metadata.seed, Some(3));
    }
    let model = dir.path().join("model.json");
    ok(&[
        "fit",
        "--kind",
        "poly4-cvx",
        "--train",
        s(&data.join("train.csv")),
        "--val",
        s(&data.join("validation.csv")),
        "-o",
        s(&model),
    ]);
    let (m, kind) = read_model(&model).unwrap();
    assert_eq!(kind.map(|k| k.to_string()).as_deref(), Some("poly4-cvx"));
    assert!(m.certificate().is_some());

    let out = ok(&[
        "eval",
        "--model",
        s(&model),
        "--data",
        s(&data.join("test.csv")),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let delta = report["mean_deg"].as_f64().expect("mean_deg field");
    assert!(delta > 0.0 && delta < 90.0);

    let out = ok(&["invert", "--model", s(&model), "--twist", "0,-0.6,0.8"]);
    let inv: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let load: Vec<f64> = serde_json::from_value(inv["load"].clone()).unwrap();
    let v = m
        .gradient(&nalgebra::Vector3::from_column_slice(&load))
        .normalize();
    assert!((v - nalgebra::Vector3::new(0.0, -0.6, 0.8)).norm() <= 1e-6);
}

#[test]
fn stable_and_simulate_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--support",
        "ring",
        "--points",
        "36",
        "--n",
        "40",
        "--seed",
        "1",
        "-o",
        s(&data),
    ]);
    let model = dir.path().join("quad.json");
    ok(&[
        "fit",
        "--kind",
        "quad",
        "--train",
        s(&data.join("data.csv")),
        "-o",
        s(&model),
    ]);

    let sweep = dir.path().join("stable.csv");
    ok(&[
        "stable",
        "--model",
        s(&model),
        "--p1",
        "-0.3,-1",
        "--p2",
        "0.3,-1",
        "--normal",
        "0,1",
        "--count",
        "10",
        "-o",
        s(&sweep),
    ]);
    let rows: Vec<StableRow> = read_rows(std::fs::File::open(&sweep).unwrap()).unwrap();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.sense == 1 || r.sense == -1));

    let traj = dir.path().join("traj.csv");
    ok(&[
        "simulate",
        "--model",
        s(&model),
        "--mass",
        "1",
        "--inertia",
        "0.5",
        "--twist",
        "0.4,-0.1,0.5",
        "-o",
        s(&traj),
    ]);
    let rows: Vec<TrajectoryRow> = read_rows(std::fs::File::open(&traj).unwrap()).unwrap();
    assert!(rows.len() > 2);
    assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
    let last = rows.last().unwrap();
    assert_eq!((last.vx, last.vy, last.omega), (0.0, 0.0, 0.0));
}

#[test]
fn study_writes_versioned_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study.json");
    ok(&[
        "study",
        "--support",
        "ring",
        "--points",
        "36",
        "--trials",
        "3",
        "--sizes",
        "7,15",
        "--kinds",
        "quad,poly4",
        "-o",
        s(&out),
    ]);
    let report: StudyReport = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report.format_version, 1);
    assert_eq!(report.cells.len(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(
        cli(&["fit", "--kind", "cubic", "--train", "x.csv", "-o", "m.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = cli(&[
        "fit",
        "--kind",
        "quad",
        "--train",
        s(&missing),
        "-o",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
