use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metric-knn-lab"))
}

fn run(args: &[&str], outdir: &Path) -> Output {
    bin().args(args).arg("--outdir").arg(outdir).output().expect("binary runs")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn list_is_stable_and_complete() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        names,
        ["weak-consistency", "strong-path", "prop12", "lb-check", "dgkl-sweep", "concentration", "koranyi"]
    );
    let again = bin().arg("list").output().unwrap();
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
}

#[test]
fn missing_seed_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "koranyi"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "nope", "--seed", "1"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["run", "koranyi", "--seed", "x"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["run", "koranyi", "--seed", "1", "--p", "0.3"], dir.path()).status.code(), Some(1));
    assert_eq!(
        run(&["run", "koranyi", "--seed", "1", "--set", "bogus=1"], dir.path()).status.code(),
        Some(1)
    );
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ not json").unwrap();
    let out = run(&["run", "koranyi", "--seed", "1", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(1));
}

#[test]
fn unwritable_outdir_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run(&["run", "koranyi", "--seed", "1"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dgkl_sweep_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "run", "dgkl-sweep", "--model", "nested", "--alphas", "2^-3..2^-10", "--seed", "7", "--set", "points=3",
            "--set", "samples=5000",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("dgkl-sweep-7.csv");
    assert!(header(&csv).starts_with("alpha,d_measure,stderr,bound_4a,exact_lower"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 9);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dgkl-sweep-7.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["model"]["kind"], "nested");
    assert_eq!(manifest["config"]["alphas"].as_array().unwrap().len(), 8);
    assert!(manifest["version"].is_string());
    assert_eq!(manifest["input_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn prop12_checkpoint_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["run", "prop12", "--p", "0.3678794", "--horizon", "50", "--trials", "10000", "--seed", "1"],
        dir.path(),
    );
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    let text = fs::read_to_string(dir.path().join("prop12-1.csv")).unwrap();
    assert!(text.starts_with("i,k,"));
    assert_eq!(text.lines().count(), 50);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "weak-consistency", "--seed", "5", "--trials", "3", "--set", "n_grid=[50,100]"];
    assert!(run(&args, a.path()).status.success());
    let mut cmd = bin();
    cmd.args(args).arg("--outdir").arg(b.path()).env("METRIC_KNN_LAB_THREADS", "1");
    assert!(cmd.output().unwrap().status.success());
    for f in ["weak-consistency-5.csv", "weak-consistency-5.manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"n": 6, "shrink": 0.25}"#).unwrap();
    let out = run(
        &["run", "koranyi", "--seed", "3", "--config", cfg.to_str().unwrap(), "--set", "n=4"],
        dir.path(),
    );
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("koranyi-3.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 4);
    assert_eq!(manifest["config"]["shrink"], 0.25);
    assert_eq!(fs::read_to_string(dir.path().join("koranyi-3.csv")).unwrap().lines().count(), 5);
}

#[test]
fn bound_violation_exits_two() {
    // a single neighbour with η = 1/2 is off by 1/2 everywhere, far beyond
    // what the exponential bound allows at this n
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "run",
            "concentration",
            "--seed",
            "1",
            "--set",
            r#"problem={"model":{"kind":"uniform-cube","dim":1},"eta":{"kind":"constant","p":0.5}}"#,
            "--set",
            "k=1",
            "--set",
            "n=300",
            "--set",
            "beta=0",
            "--set",
            "trials=5",
            "--set",
            "eval_points=20",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation"));
    assert!(dir.path().join("concentration-1.csv").exists());
}
