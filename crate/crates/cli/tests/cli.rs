//! Behavior of the `ec-eigen` binary and the harness entry points: exit
//! codes, artifact layout, reproducibility, encode/reload, comparison.

use std::path::Path;
use std::process::Command;

use ec_eigen::compare::compare_runs;
use ec_eigen::config::ExperimentConfig;
use ec_eigen::experiment::run_experiment;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ec-eigen"))
}

fn write_config(dir: &Path, name: &str, v: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn tridiagonal_run_config(out: &Path) -> serde_json::Value {
    serde_json::json!({
        "matrix": {"kind": "tridiagonal", "n": 4},
        "solver": "tracemin",
        "wanted": 2,
        "epsilon": 1e-10,
        "max-iterations": 300,
        "coding": {"k": 2, "seed": 7},
        "schedule": {"mode": "single", "iteration": 1, "rows": [2]},
        "seed": 42,
        "output": out
    })
}

#[test]
fn run_produces_artifacts_and_reference_eigenvalues() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", tridiagonal_run_config(&out));
    let output = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));

    for file in ["results.json", "history.csv", "timing.csv", "recovered.json"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["status"], "converged");
    let eigs = results["eigenvalues"].as_array().unwrap();
    assert!((eigs[0].as_f64().unwrap() - 0.381966).abs() < 1e-5);
    assert!((eigs[1].as_f64().unwrap() - 1.381966).abs() < 1e-5);
    // fault map records which coding column filled the erased row
    let recovered: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("recovered.json")).unwrap())
            .unwrap();
    assert_eq!(recovered["fault-map"]["2"], 0);
}

#[test]
fn identity_with_fault_keeps_unit_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        serde_json::json!({
            "matrix": {"kind": "identity", "n": 10},
            "solver": "power-implicit",
            "wanted": 3,
            "epsilon": 1e-10,
            "max-iterations": 100,
            "coding": {"k": 2, "seed": 1},
            "schedule": {"mode": "single", "iteration": 2, "rows": [4]},
            "seed": 5,
            "output": out
        }),
    );
    let output = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    for v in results["eigenvalues"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn rerunning_the_echoed_config_reproduces_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    let base = serde_json::json!({
        "matrix": {"kind": "random-spd", "n": 80, "density": 0.05, "seed": 3},
        "solver": "tracemin",
        "wanted": 3,
        "epsilon": 1e-8,
        "max-iterations": 200,
        "coding": {"k": 3, "seed": 11},
        "schedule": {"mode": "multi-random", "events": 2, "rows-per-event": 1,
                      "iteration-range": [2, 6], "seed": 9},
        "seed": 17,
        "output": out1
    });
    let cfg1 = write_config(tmp.path(), "cfg1.json", base.clone());
    let s1 = bin().args(["run", "--config"]).arg(&cfg1).status().unwrap();
    assert!(s1.success());

    // rerun from the config echoed into results.json
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("results.json")).unwrap())
            .unwrap();
    let echoed = results["config"].clone();
    let cfg2 = write_config(tmp.path(), "cfg2.json", echoed);
    let s2 = bin()
        .args(["run", "--config"])
        .arg(&cfg2)
        .args(["--output"])
        .arg(&out2)
        .status()
        .unwrap();
    assert!(s2.success());

    let r1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("results.json")).unwrap())
            .unwrap();
    let r2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("results.json")).unwrap())
            .unwrap();
    assert_eq!(r1["eigenvalues"], r2["eigenvalues"], "bitwise identical eigenvalues");
    assert_eq!(r1["iterations"], r2["iterations"]);
    assert_eq!(r1["schedule"], r2["schedule"]);
}

#[test]
fn encode_then_run_with_persisted_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    // write a small matrix to encode
    let a = ec_eigen_core::matrix::tridiagonal(12);
    let m_path = tmp.path().join("a.mtx");
    ec_eigen_core::io::write_matrix_market_sym(&m_path, &a).unwrap();

    let blocks_dir = tmp.path().join("blocks");
    let status = bin()
        .args(["encode", "--matrix"])
        .arg(&m_path)
        .args(["--k", "3", "--p", "auto", "--seed", "21", "--out"])
        .arg(&blocks_dir)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["E.mtx", "E.json", "R.mtx", "S.mtx", "T.mtx"] {
        assert!(blocks_dir.join(f).exists(), "{f} missing");
    }

    // run once with the persisted blocks, once building from the same seed
    let out_a = tmp.path().join("with-blocks");
    let cfg_a = write_config(
        tmp.path(),
        "a.json",
        serde_json::json!({
            "matrix": {"kind": "file", "path": m_path},
            "solver": "tracemin",
            "wanted": 2,
            "epsilon": 1e-9,
            "max-iterations": 200,
            "coding": {"k": 3, "seed": 21, "blocks-dir": blocks_dir},
            "schedule": {"mode": "single", "iteration": 2, "rows": [5]},
            "seed": 2,
            "output": out_a
        }),
    );
    assert!(bin().args(["run", "--config"]).arg(&cfg_a).status().unwrap().success());

    let out_b = tmp.path().join("rebuilt");
    let cfg_b = write_config(
        tmp.path(),
        "b.json",
        serde_json::json!({
            "matrix": {"kind": "file", "path": tmp.path().join("a.mtx")},
            "solver": "tracemin",
            "wanted": 2,
            "epsilon": 1e-9,
            "max-iterations": 200,
            "coding": {"k": 3, "seed": 21},
            "schedule": {"mode": "single", "iteration": 2, "rows": [5]},
            "seed": 2,
            "output": out_b
        }),
    );
    assert!(bin().args(["run", "--config"]).arg(&cfg_b).status().unwrap().success());

    let ra: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("results.json")).unwrap())
            .unwrap();
    let rb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_b.join("results.json")).unwrap())
            .unwrap();
    assert_eq!(ra["eigenvalues"], rb["eigenvalues"], "persisted blocks round-trip bitwise");
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        serde_json::json!({
            "matrix": {"kind": "tridiagonal", "n": 4},
            "solver": "tracemin",
            "wanted": 0,
            "epsilon": 1e-8,
            "max-iterations": 10,
            "schedule": {"mode": "none"},
            "seed": 1,
            "output": tmp.path().join("x")
        }),
    );
    let output = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    // missing config file also maps to a config error
    let output = bin().args(["run", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn oracle_prints_reference_values() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ec_eigen_core::matrix::tridiagonal(4);
    let m_path = tmp.path().join("a.mtx");
    ec_eigen_core::io::write_matrix_market_sym(&m_path, &a).unwrap();
    let output = bin()
        .args(["oracle", "--matrix"])
        .arg(&m_path)
        .args(["--smallest", "2"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    let values: Vec<f64> =
        text.lines().map(|l| l.trim().parse::<f64>().unwrap()).collect();
    assert_eq!(values.len(), 2);
    assert!((values[0] - 0.3819660112501051).abs() < 1e-10);
    assert!((values[1] - 1.3819660112501051).abs() < 1e-10);
}

#[test]
fn compare_rejects_mismatched_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("r1");
    let out2 = tmp.path().join("r2");
    let mut v1 = tridiagonal_run_config(&out1);
    v1["schedule"] = serde_json::json!({"mode": "none"});
    let cfg1: ExperimentConfig = serde_json::from_value(v1).unwrap();
    run_experiment(&cfg1, None).unwrap();
    let mut v2 = tridiagonal_run_config(&out2);
    v2["matrix"] = serde_json::json!({"kind": "tridiagonal", "n": 8});
    v2["schedule"] = serde_json::json!({"mode": "none"});
    let cfg2: ExperimentConfig = serde_json::from_value(v2).unwrap();
    run_experiment(&cfg2, None).unwrap();

    let err = compare_runs(&[out1.clone(), out2.clone()]).unwrap_err();
    assert!(err.to_string().contains("incompatible"));
    assert_eq!(err.exit_code(), 2);

    // identical runs compare with zero overheads
    let cmp = compare_runs(&[out1.clone(), out1]).unwrap();
    assert_eq!(cmp.rows[1].iter_overhead_vs_no_fault, Some(0.0));
    assert_eq!(cmp.rows[1].time_overhead, Some(0.0));
}

#[test]
fn seed_env_var_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("e1");
    let out2 = tmp.path().join("e2");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        serde_json::json!({
            "matrix": {"kind": "random-spd", "n": 40, "density": 0.2, "seed": 1},
            "solver": "power-implicit",
            "wanted": 2,
            "epsilon": 1e-8,
            "max-iterations": 500,
            "coding": {"k": 2, "seed": 4},
            "schedule": {"mode": "none"},
            "seed": 99,
            "output": out1
        }),
    );
    assert!(bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .env("EC_EIGEN_SEED", "123456")
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(&out2)
        .env("EC_EIGEN_SEED", "123456")
        .status()
        .unwrap()
        .success());
    let r1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("results.json")).unwrap())
            .unwrap();
    let r2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("results.json")).unwrap())
            .unwrap();
    assert_eq!(r1["config"]["seed"], 123456);
    assert_eq!(r1["eigenvalues"], r2["eigenvalues"]);
}

#[test]
fn restart_baseline_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("base");
    let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "matrix": {"kind": "random-spd", "n": 60, "density": 0.2, "seed": 8},
        "solver": "tracemin",
        "wanted": 2,
        "epsilon": 1e-8,
        "max-iterations": 300,
        "coding": {"k": 2, "seed": 3},
        "schedule": {"mode": "single", "iteration": 4, "rows": [17]},
        "baseline": "restart-on-fault",
        "seed": 6,
        "output": out
    }))
    .unwrap();
    let run = run_experiment(&cfg, None).unwrap();
    let baseline = run.results.baseline.expect("baseline requested");
    assert!(baseline.converged);
    assert_eq!(baseline.segments.len(), 2, "one restart plus the final attempt");
    assert_eq!(
        baseline.cumulative_iterations,
        baseline.segments.iter().sum::<usize>()
    );
}
