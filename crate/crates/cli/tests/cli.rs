use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ttrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttrs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ttrs_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttrs"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const DISJOINT: &str = "ttrs 1\nn 2\nconvention half\ndelta1 1\ndelta2 1\nA dense\n-1 0\n0 1\na\n0 0\nB dense\n1 0\n0 1\nc\n3 0\n";

#[test]
fn first_example_solves_to_minus_four() {
    let dir = tempfile::tempdir().unwrap();
    let g = ttrs(&["gen", "--class", "example1", "--out", path(dir.path())]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    let file = dir.path().join("example1_n2_d1_s0.ttrs");
    let o = ttrs(&["solve", path(&file)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let obj = v["objective"].as_f64().unwrap();
    assert!((obj + 4.0).abs() <= 1e-6, "{obj}");
    // both constraints active and one negative curvature direction: no certificate
    assert_eq!(v["status"], "stationary_point");
    assert_eq!(v["kkt"]["negative_eigenvalues"], 1);
    assert!(v["pool"].as_array().is_some_and(|p| !p.is_empty()));
    assert!(v["trace"].is_array());
}

#[test]
fn infeasible_and_malformed_inputs_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("disjoint.ttrs");
    fs::write(&good, DISJOINT).unwrap();
    let o = ttrs(&["solve", path(&good)]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "infeasible");

    let bad = dir.path().join("bad.ttrs");
    fs::write(&bad, DISJOINT.replace("0 1\na", "0 oops\na")).unwrap();
    let o = ttrs(&["solve", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 8"), "{err}");

    let o = ttrs(&["solve", path(&good), "--tau", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_is_byte_deterministic_and_named_by_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = ttrs(&[
            "gen",
            "--class",
            "class2",
            "--n",
            "6",
            "--density",
            "0.5",
            "--seed",
            "40",
            "--count",
            "3",
            "--out",
            path(dir.path()),
        ]);
        assert!(o.status.success());
    }
    for seed in 40..43 {
        for ext in ["ttrs", "json"] {
            let name = format!("class2_n6_d0.5_s{seed}.{ext}");
            let x = fs::read(a.path().join(&name)).unwrap();
            let y = fs::read(b.path().join(&name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }
    let side: Value =
        serde_json::from_slice(&fs::read(a.path().join("class2_n6_d0.5_s40.json")).unwrap())
            .unwrap();
    assert_eq!(side["lngm"].as_array().unwrap().len(), 6);
}

#[test]
fn homogeneous_files_have_zero_linear_term_and_center() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttrs(&[
        "gen",
        "--class",
        "class4",
        "--n",
        "5",
        "--sparse",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("class4_n5_d1_s0.ttrs")).unwrap();
    let problem = ttrs_core::format::parse(&text).unwrap();
    assert!(problem.linear.iter().all(|&v| v == 0.0));
    assert!(problem.center.iter().all(|&v| v == 0.0));
}

#[test]
fn bench_header_matches_the_golden_file() {
    let golden = include_str!("golden/bench_header.csv");
    let empty = tempfile::tempdir().unwrap();
    let o = ttrs(&["bench", path(empty.path())]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), golden);
}

#[test]
fn bench_flags_infeasible_rows_and_averages_solved_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttrs(&["gen", "--class", "example2", "--out", path(dir.path())]);
    assert!(o.status.success());
    fs::write(dir.path().join("disjoint.ttrs"), DISJOINT).unwrap();
    let o = ttrs(&["bench", path(dir.path())]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3, "{text}");
    assert_eq!(rows[0][0], "disjoint.ttrs");
    assert_eq!(rows[0][10], "infeasible");
    assert_eq!(rows[0][5], "");
    assert_eq!(rows[1][0], "example2_n2_d1_s0.ttrs");
    assert_eq!(rows[2][0], "mean_n2");
    assert_eq!(rows[2][5], rows[1][5]);
    assert_eq!(rows[2][10], "solved 1/2");
}

#[test]
fn bench_objective_and_kkt_columns_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttrs(&[
        "gen",
        "--class",
        "class3b",
        "--n",
        "6",
        "--count",
        "4",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success());
    let columns = |threads: &str| -> Vec<(String, String)> {
        let o = ttrs_env(
            &["bench", path(dir.path()), "--preset", "class3"],
            "TTRS_THREADS",
            threads,
        );
        assert!(o.status.success());
        stdout(&o)
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[4].to_string(), f[5].to_string())
            })
            .collect()
    };
    assert_eq!(columns("1"), columns("3"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("disjoint.ttrs"), DISJOINT).unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "tau = 5.0\n").unwrap();
    let file = dir.path().join("disjoint.ttrs");
    let o = ttrs(&["solve", path(&file), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let o = ttrs(&["solve", path(&file), "--config", path(&cfg), "--tau", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_matches_the_second_example_and_rejects_other_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    ttrs(&["gen", "--class", "example2", "--out", path(dir.path())]);
    let o = ttrs(&[
        "oracle",
        path(&dir.path().join("example2_n2_d1_s0.ttrs")),
        "--grid",
        "400",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["objective"].as_f64().unwrap() + 3.8964428).abs() < 1e-6);
    ttrs(&[
        "gen",
        "--class",
        "class4",
        "--n",
        "3",
        "--out",
        path(dir.path()),
    ]);
    let o = ttrs(&["oracle", path(&dir.path().join("class4_n3_d1_s0.ttrs"))]);
    assert_eq!(o.status.code(), Some(1));
}
