use std::path::Path;
use std::process::Command;

use ganduf::cli::run_cli;
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("ganduf").chain(args.iter().copied()))
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ganduf"));
    c.env_remove("GANDUF_SEED");
    c
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn airfoil_model(dir: &Path) {
    let d = dir.to_str().unwrap();
    let gen = ["gen-data", "--benchmark", "airfoil", "--n-nominal", "12", "--n-fab", "2", "--points", "32", "--seed", "1", "--out", d];
    assert_eq!(run(&gen), 0);
    let ds = ganduf::datasets::archive_read(&dir.join("dataset.gdf")).unwrap();
    assert_eq!((ds.n_nominal(), ds.n_fab()), (12, 2));
    assert_eq!(read_json(&dir.join("config.json"))["seed"], 1);
    let train = ["train", "--data", d, "--dp", "7", "--dc", "5", "--dz", "10", "--steps", "30", "--seed", "1", "--out", d];
    assert_eq!(run(&train), 0);
}

#[test]
fn gen_train_uq_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    airfoil_model(tmp.path());
    let d = tmp.path().to_str().unwrap();
    let out = tmp.path().join("uq");
    let uq = ["uq", "--model", d, "--n-mc", "20", "--tau", "0.05", "--out", out.to_str().unwrap()];
    assert_eq!(run(&uq), 0);
    let rep = read_json(&out.join("uq_report.json"));
    assert_eq!(rep["n_mc"], 20);
    assert_eq!(rep["c_p"].as_array().unwrap().len(), 7);
    let samples: Vec<f64> = rep["samples"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    // lower order statistic at ceil(0.05 * 20) = 1
    assert_eq!(rep["quantile"].as_f64().unwrap(), sorted[0]);

    let cfg = read_json(&tmp.path().join("config.json"));
    assert_eq!(cfg["command"], "train");
    assert_eq!(cfg["config"]["latent"]["d_p"], 7);
    assert_eq!(cfg["config"]["train"]["steps"], 30);
}

#[test]
fn uq_without_out_prints_to_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    airfoil_model(tmp.path());
    let o = bin()
        .args(["uq", "--model", tmp.path().to_str().unwrap(), "--n-mc", "8"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 8);
}

#[test]
fn optimize_writes_trace_result_and_design() {
    let tmp = tempfile::tempdir().unwrap();
    airfoil_model(tmp.path());
    let d = tmp.path().to_str().unwrap();
    let out = tmp.path().join("opt");
    let args = [
        "optimize", "--model", d, "--mode", "robust", "--n-init", "3", "--n-total", "6", "--n-mc", "10", "--seed", "4",
        "--out", out.to_str().unwrap(),
    ];
    assert_eq!(run(&args), 0);
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 6);
    let first: Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["mode"], "robust");
    let res = read_json(&out.join("result.json"));
    assert_eq!(res["evaluations"], 6);
    assert_eq!(res["mode"]["kind"], "quantile");
    assert!(out.join("best_design.gdf").is_file());
}

#[test]
fn runs_are_byte_identical() {
    let outputs = |tmp: &Path| {
        airfoil_model(tmp);
        let d = tmp.to_str().unwrap();
        let opt = tmp.join("opt");
        let args = ["optimize", "--model", d, "--n-init", "3", "--n-total", "5", "--n-mc", "8", "--out", opt.to_str().unwrap()];
        assert_eq!(run(&args), 0);
        ["dataset.gdf", "model.gdm", "config.json", "opt/trace.jsonl", "opt/result.json", "opt/best_design.gdf"]
            .map(|f| std::fs::read(tmp.join(f)).unwrap())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(outputs(a.path()), outputs(b.path()));
}

#[test]
fn metasurface_study_and_fit_test() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let gen = ["gen-data", "--benchmark", "metasurface", "--n-nominal", "10", "--n-fab", "2", "--res", "8", "--out", d];
    assert_eq!(run(&gen), 0);
    let st = tmp.path().join("st");
    let study = [
        "study", "--data", d, "--grid", "2x2,3x1", "--dz", "2", "--steps", "10", "--n-targets", "2", "--n-nominals", "2",
        "--n-samples", "5", "--out", st.to_str().unwrap(),
    ];
    assert_eq!(run(&study), 0);
    let csv = std::fs::read_to_string(st.join("study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("d_p,d_c,"));

    let train = ["train", "--data", d, "--dp", "2", "--dc", "2", "--dz", "2", "--steps", "10", "--out", d];
    assert_eq!(run(&train), 0);
    let fit = tmp.path().join("fit");
    let args = ["fit-test", "--model", d, "--data", d, "--n-targets", "3", "--restarts", "2", "--out", fit.to_str().unwrap()];
    assert_eq!(run(&args), 0);
    let v = read_json(&fit.join("fit.json"));
    assert_eq!(v["rms"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_and_seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"data": {"benchmark": "airfoil", "airfoil": {"n_nominal": 5, "m_fab": 1, "n_points": 16}}}"#).unwrap();
    let gen = |out: &Path, seed_env: Option<&str>, extra: &[&str]| {
        let mut c = bin();
        c.args(["gen-data", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).args(extra);
        if let Some(s) = seed_env {
            c.env("GANDUF_SEED", s);
        }
        assert!(c.status().unwrap().success());
        read_json(&out.join("config.json"))["config"]["data"]["airfoil"].clone()
    };
    let a = gen(&tmp.path().join("a"), None, &[]);
    assert_eq!(a["n_nominal"], 5);
    assert_eq!(a["seed"], 0);
    let b = gen(&tmp.path().join("b"), Some("17"), &[]);
    assert_eq!(b["seed"], 17);
    let c = gen(&tmp.path().join("c"), Some("17"), &["--seed", "3", "--n-nominal", "6"]);
    assert_eq!((c["seed"].as_u64(), c["n_nominal"].as_u64()), (Some(3), Some(6)));

    // an explicit section seed in the file beats the environment
    std::fs::write(&cfg, r#"{"data": {"airfoil": {"n_nominal": 5, "m_fab": 1, "n_points": 16, "seed": 9}}}"#).unwrap();
    let d = gen(&tmp.path().join("d"), Some("17"), &[]);
    assert_eq!(d["seed"], 9);
}

#[test]
fn errors_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bogus"]), 2);
    assert_eq!(run(&["uq"]), 2);
    assert_eq!(run(&["--help"]), 0);

    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"train": {"stepz": 3}}"#).unwrap();
    let o = bin()
        .args(["gen-data", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("stepz"));

    let o = bin().args(["uq", "--model", "/nonexistent/model.gdm"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "io");

    let o = bin().env("GANDUF_SEED", "abc").args(["gen-data", "--out", tmp.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
