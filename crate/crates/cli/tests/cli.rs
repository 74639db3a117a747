use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn goatmix(args: &[&str]) -> Output {
    goatmix_env(args, &[])
}

fn goatmix_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_goatmix"));
    cmd.args(args).env_remove("GOATMIX_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: [&str; 12] = [
    "--repeats", "2", "--k-sgoat", "11", "--k-cgoat", "7", "--patience-sgoat", "2", "--patience-cgoat", "2",
    "--encode", "target",
];

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(code(&goatmix(&["--help"])), 0);
    assert_eq!(code(&goatmix(&["frobnicate"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&goatmix(&["ingest", "--data", "bundled:adult:50", "--out", out, "--bogus"])), 2);
    assert_eq!(
        code(&goatmix(&["experiment", "--data", "bundled:adult:50", "--out", out, "--encode=sometimes"])),
        2
    );
    let missing = goatmix(&["ingest", "--data", "/no/such.csv", "--out", out]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));
    assert_eq!(code(&goatmix(&["sgoat", "--data", "bundled:adult:50", "--out", out, "--method", "gan"])), 2);
    assert_eq!(code(&goatmix(&["report", s(&dir.path().join("none.json"))])), 2);
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["ingest", "--data", "bundled:adult:50", "--out", s(dir.path())];
    assert_eq!(code(&goatmix_env(&args, &[("GOATMIX_THREADS", "0")])), 2);
    assert_eq!(code(&goatmix_env(&args, &[("GOATMIX_THREADS", "two")])), 2);
    assert_eq!(code(&goatmix_env(&args, &[("GOATMIX_THREADS", "2")])), 0);
}

#[test]
fn malformed_data_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "a,b,y\n1,2,0\n3,4\n").unwrap();
    let o = goatmix(&["ingest", "--data", s(&csv), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let one_class = dir.path().join("one.csv");
    fs::write(&one_class, "a,y\n1,0\n2,0\n3,0\n4,0\n5,0\n6,0\n7,0\n8,0\n9,0\n10,0\n11,0\n12,0\n").unwrap();
    let o = goatmix(&["sgoat", "--data", s(&one_class), "--out", s(&dir.path().join("p")), "--method", "histogram"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ingest_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = goatmix(&["ingest", "--data", "bundled:adult:300", "--seed", "4", "--out", s(&first)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&first.join("summary.json"));
    assert_eq!(summary["rows"], 300);
    assert_eq!(summary["label"], "income");

    let second = dir.path().join("second");
    let o = goatmix(&[
        "ingest", "--data", s(&first.join("data.csv")), "--schema", s(&first.join("schema.txt")), "--out", s(&second),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(first.join("data.csv")).unwrap(), fs::read(second.join("data.csv")).unwrap());
    assert_eq!(fs::read(first.join("schema.txt")).unwrap(), fs::read(second.join("schema.txt")).unwrap());
}

#[test]
fn sgoat_writes_trial_log_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kde");
    let o = goatmix(&[
        "sgoat", "--data", "bundled:adult:600", "--encode", "target", "--method", "kdeperturb", "--k-sgoat", "12",
        "--patience-sgoat", "3", "--seed", "2", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    let iterations = r["iterations_run"].as_u64().unwrap() as usize;
    assert!((1..=12).contains(&iterations));
    let log = fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(log.lines().count(), iterations);
    assert!(r["best_val_auc"].as_f64().unwrap() > 0.5);
    assert!(out.join("model.json").exists() && out.join("synthetic.csv").exists());
}

#[test]
fn degenerate_runs_still_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one-row");
    let o = goatmix(&[
        "sgoat", "--data", "bundled:adult:400", "--method", "histogram", "--rows", "1", "--k-sgoat", "11",
        "--patience-sgoat", "1", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    assert_eq!(r["degenerate"], true);
    assert_eq!(r["best_val_auc"], 0.5);

    let exp = dir.path().join("exp");
    let mut args = vec!["experiment", "--data", "bundled:adult:400", "--rows", "1", "--out", s(&exp)];
    args.extend(TINY);
    let o = goatmix(&args);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&exp.join("report.json"));
    assert_eq!(report["degenerate"], true);
    assert!(exp.join("runs.csv").exists() && exp.join("report.txt").exists());
}

#[test]
fn cgoat_reports_mixture_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mix");
    let o = goatmix(&[
        "cgoat", "--data", "bundled:adult:600", "--encode", "target", "--k-cgoat", "8", "--patience-cgoat", "2",
        "--seed", "5", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    let alpha = r["alpha"].as_array().unwrap();
    assert_eq!(alpha.len(), 4);
    let total: f64 = alpha.iter().map(|a| a["weight"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(String::from_utf8_lossy(&o.stdout).contains("alpha:"));
    assert!(fs::read_to_string(out.join("trials.jsonl")).unwrap().lines().count() >= 5);
}

#[test]
fn experiment_is_reproducible_and_rerenderable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["experiment", "--data", "bundled:adult:600", "--seed", "3", "--rows", "400", "--out", s(&out)];
        args.extend(TINY);
        let o = goatmix_env(&args, &[("GOATMIX_THREADS", threads)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    for f in ["report.json", "runs.csv", "report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let again = dir.path().join("again");
    let o = goatmix(&["report", s(&a), "--out", s(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, fs::read(a.join("report.txt")).unwrap());
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());
}
