use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sagex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sagex")).args(args).env_remove("SAGEX_SEED").output().unwrap()
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn run_writes_one_record_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let o = sagex(&[
        "run", "--algo", "ran", "--c", "8", "--graph", "family:random_connected,n=32,m=64", "--trials", "500",
        "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = records(&out);
    assert_eq!(recs.len(), 500);
    for (t, r) in recs.iter().enumerate() {
        assert_eq!(r["trial"], t as u64);
        assert_eq!(r["n"], 32);
        assert_eq!(r["violations"], 0);
        assert!(r["cover_step"].is_u64());
    }
}

#[test]
fn det_from_a_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.pg");
    let o = sagex(&["gen", "--graph", "family:grid,rows=4,cols=4,seed=2", "--out", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let file = format!("file:{}", g.display());
    let o = sagex(&["run", "--algo", "det", "--k", "64", "--graph", &file, "--trials", "100", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 100);
}

#[test]
fn bad_parameters_exit_with_two() {
    let o = sagex(&["run", "--algo", "ran", "--c", "1", "--graph", "family:path,n=4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c must be ≥ 2"));
    let o = sagex(&["run", "--algo", "det", "--graph", "family:path,n=4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sagex(&["run", "--algo", "srw", "--graph", "file:/nonexistent/graph.pg"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sagex(&["run", "--algo", "srw", "--graph", "family:path,n=4", "--checks", "no-stage5-rule"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sagex(&["run", "--algo", "srw", "--graph", "family:cycle,n=2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cutoffs_exit_with_one_and_name_the_trial() {
    let o = sagex(&["run", "--algo", "srw", "--graph", "family:path,n=30", "--trials", "3", "--max-steps", "5", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cutoff: seed 4 trial 0"), "{err}");
}

#[test]
fn replaying_a_seed_reproduces_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for (out, jobs) in [(&a, "1"), (&b, "4")] {
        let o = sagex(&[
            "--jobs", jobs, "run", "--algo", "ran", "--c", "3", "--graph", "family:lollipop,a=5,b=5", "--trials", "40",
            "--seed", "12", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn seed_defaults_to_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_sagex"))
        .args(["run", "--algo", "rotor", "--graph", "family:cycle,n=6", "--trials", "1"])
        .env("SAGEX_SEED", "31")
        .output()
        .unwrap();
    let rec: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["seed"], 31);
}

#[test]
fn csv_has_the_same_columns() {
    let o = sagex(&["run", "--algo", "det", "--k", "3", "--graph", "family:cycle,n=6", "--trials", "2", "--format", "csv", "--checks", "all,no-stage5-rule"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algo,n,m,D,seed,trial,cover_step,moves,color_changes,phase_resets,errors_raised,trace_hash,violations,checks"
    );
    assert!(lines.next().unwrap().ends_with("\"all,no-stage5-rule\""));
}

#[test]
fn verify_reports_exhaustive_rotor_runs() {
    let o = sagex(&["verify", "--algo", "rotor", "--graph", "family:path,n=3"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["mode"], "exhaustive");
    assert_eq!(r["configs"], 8);
    assert!(r["worst_cover"].as_u64().unwrap() <= r["bound"].as_u64().unwrap());
}

#[test]
fn verify_notes_an_unmet_precondition() {
    let o = sagex(&["verify", "--algo", "det", "--k", "1", "--graph", "family:path,n=4", "--samples", "100", "--max-steps", "500"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
}

#[test]
fn hard_instance_writes_graph_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.pg");
    let o = sagex(&["hard-instance", "--algo", "srw", "--graph", "family:clique,n=5", "--start", "0", "--trials", "500", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let g: sagex_core::PortGraph = std::fs::read_to_string(&out).unwrap().parse().unwrap();
    assert_eq!((g.n(), g.m()), (6, 11));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("h.pg.json")).unwrap()).unwrap();
    assert_eq!(meta["new_node"], 5);
    assert_eq!(meta["trials"], 500);
    assert!(meta["est_traverse_prob"].as_f64().unwrap() <= 0.6);
}

#[test]
fn lowerbound_reports_and_rejects_few_trials() {
    let o = sagex(&["lowerbound", "--algo", "srw", "--graph", "family:random_connected,n=15,m=60,seed=1", "--trials", "500", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["m"], 61);
    assert!(r["mean_cover"].as_f64().unwrap() >= 0.9 * r["bound"].as_f64().unwrap());
    let o = sagex(&["lowerbound", "--algo", "srw", "--graph", "family:cycle,n=5", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_round_trips_through_the_text_format() {
    let o = sagex(&["gen", "--graph", "family:lollipop,a=6,b=6,seed=3"]);
    assert_eq!(o.status.code(), Some(0));
    let g: sagex_core::PortGraph = String::from_utf8(o.stdout).unwrap().parse().unwrap();
    assert_eq!((g.n(), g.m(), g.diameter()), (12, 21, 7));
}
