use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kan_lmm::kan::KanNetwork;
use kan_lmm::trajectory::Trajectory;

fn kan_lmm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kan-lmm"))
        .current_dir(dir)
        .env("KAN_LMM_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kan_lmm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    kan_lmm(dir, args).status.code().unwrap()
}

#[test]
fn generate_discover_train_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--system", "linear", "--h", "0.01", "--out", "lin.csv"]);
    let traj = Trajectory::load(dir.join("lin.csv")).unwrap();
    assert_eq!(traj.states.len(), 101);

    let text = ok(
        dir,
        &["solve-grid", "--data", "lin.csv", "--scheme", "bdf", "--steps", "2", "--system", "linear", "--out", "grid.csv"],
    );
    assert!(text.contains("kappa_2"), "{text}");
    let grid = fs::read_to_string(dir.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "t,x_1,x_2,fhat_1,fhat_2,ftrue_1,ftrue_2");
    assert_eq!(grid.lines().count(), 1 + 99);

    ok(
        dir,
        &["train", "--data", "lin.csv", "--iters", "20", "--grid", "8", "--out", "m.json", "--report", "r.json", "--system", "linear"],
    );
    let net = KanNetwork::from_document(&fs::read_to_string(dir.join("m.json")).unwrap()).unwrap();
    assert_eq!(net.shape().grid, 8);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["loss_trace"].as_array().unwrap().len(), 20);
    assert!(report["seminorm_error"].is_number());

    ok(dir, &["predict", "--model", "m.json", "--x0", "0,1", "--t1", "0.5", "--h", "0.05", "--out", "p.csv"]);
    assert_eq!(Trajectory::load(dir.join("p.csv")).unwrap().states.len(), 11);

    let bounds = ok(dir, &["bounds", "--model", "m.json", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&bounds).unwrap();
    assert_eq!(v["grid"], 8);
    assert!(v["lipschitz"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.toml"), "h = 0.1\nt1 = 0.5\n").unwrap();
    ok(dir, &["gen", "--system", "linear", "--h", "0.01", "--config", "run.toml", "--out", "a.csv"]);
    assert_eq!(Trajectory::load(dir.join("a.csv")).unwrap().states.len(), 6);
}

#[test]
fn bounds_text_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(tmp.path(), &["bounds", "--k", "3", "--grid", "64", "--dim", "2", "--lipschitz", "1"]);
    assert!(text.contains("upper_bound: 2.34374999"), "{text}");
    assert!(text.contains("vc_shape"), "{text}");
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(dir, &["frobnicate"]), 2);
    assert_eq!(code(dir, &["experiment", "table9"]), 2);
    assert_eq!(code(dir, &["gen", "--system", "lorenz", "--out", "x.csv"]), 2);
    assert_eq!(code(dir, &["train", "--data", "missing.csv", "--out", "m.json"]), 3);
    fs::write(dir.join("bad.json"), "{\"format\": 1").unwrap();
    assert_eq!(code(dir, &["predict", "--model", "bad.json", "--x0", "0,1", "--t1", "1", "--out", "p.csv"]), 4);
    fs::write(dir.join("bad.toml"), "stepsize = 0.1\n").unwrap();
    assert_eq!(code(dir, &["gen", "--system", "linear", "--config", "bad.toml", "--out", "x.csv"]), 4);
    fs::write(dir.join("short.csv"), "t,x1\n0,1\n0.1,1\n").unwrap();
    assert_eq!(
        code(dir, &["solve-grid", "--data", "short.csv", "--scheme", "ab", "--steps", "4", "--out", "g.csv"]),
        5
    );
    ok(dir, &["gen", "--system", "linear", "--h", "0.01", "--out", "lin.csv"]);
    assert_eq!(
        code(dir, &["train", "--data", "lin.csv", "--iters", "50", "--lr", "1e9", "--out", "m.json"]),
        6
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for tag in ["a", "b"] {
        ok(dir, &["gen", "--system", "opinion", "--dim", "20", "--seed", "42", "--t1", "2", "--h", "0.01", "--out", &format!("op_{tag}.csv")]);
        ok(dir, &["train", "--data", &format!("op_{tag}.csv"), "--iters", "5", "--grid", "8", "--out", &format!("m_{tag}.json")]);
    }
    let read = |name: &str| fs::read(dir.join(name)).unwrap();
    assert_eq!(read("op_a.csv"), read("op_b.csv"));
    assert_eq!(read("m_a.json"), read("m_b.json"));
}
