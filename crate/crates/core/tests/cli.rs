use std::path::Path;
use std::process::{Command, Output};

fn nring_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nring-lab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_prints_every_experiment() {
    let out = nring_lab(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().all(|l| l.split('\t').count() == 2));
}

#[test]
fn builtin_run_passes_and_is_reproducible() {
    let a = nring_lab(&["run", "nilpotent", "--no-timestamp"]);
    let b = nring_lab(&["run", "nilpotent", "--no-timestamp"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["verdict"], "pass");
    assert_eq!(v["config_echo"]["algebra"], "UT4");
    assert!(v.get("timestamp").is_none());
    for key in ["experiment", "config_echo", "reports", "checks", "traces", "tables"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn timestamp_is_present_by_default() {
    let out = nring_lab(&["counterexample", "nilpotent"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["timestamp"].as_u64().unwrap() > 0);
}

#[test]
fn config_file_with_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.csv");
    let cfg = write_config(
        dir.path(),
        "hom.toml",
        &format!(
            "experiment = \"rassias-hom\"\np = 0.25\nformat = \"csv\"\noutput = \"{}\"\n",
            out_path.display()
        ),
    );
    let out = nring_lab(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap().len(), 13);
    let recs: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert!(recs.len() >= 4);
    assert!(recs.iter().all(|r| &r[0] == "rassias-hom" && &r[10] == "true"));
}

#[test]
fn violated_declaration_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tight.toml", "experiment = \"rassias-hom\"\ndelta = 0.0\n");
    let out = nring_lab(&["run", &cfg, "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "fail");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_p = write_config(dir.path(), "p1.toml", "experiment = \"rassias-der-sum\"\np = 1.0\n");
    let unknown = write_config(dir.path(), "unk.toml", "experiment = \"luminet\"\nwhat = 3\n");
    for target in [bad_p.as_str(), unknown.as_str(), "no-such-experiment"] {
        let out = nring_lab(&["run", target]);
        assert_eq!(out.status.code(), Some(2), "{target}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(nring_lab(&["counterexample", "hyers"]).status.code(), Some(2));
}

#[test]
fn limit_subcommand() {
    let out = nring_lab(&["limit", "1.0", "--map", "sine"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["status"], "converged");

    let out = nring_lab(&["limit", "1", "--map", "luminet"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["status"], "diverged");

    assert_eq!(nring_lab(&["limit", "1,2", "--map", "sine"]).status.code(), Some(2));
    assert_eq!(nring_lab(&["limit", "abc"]).status.code(), Some(2));
}
