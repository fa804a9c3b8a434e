use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn vishsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vishsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("VISHSIM_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_is_byte_for_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.log", "b.log"] {
        let o = vishsim(
            &[
                "simulate",
                "--scenario",
                "innovatech",
                "--levels",
                "1,2,3,4",
                "--per-level",
                "5",
                "--seed",
                "1",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("20 calls written"));
    }
    let a = std::fs::read(dir.path().join("a.log")).unwrap();
    let b = std::fs::read(dir.path().join("b.log")).unwrap();
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 20);
    assert_eq!(a, b);

    let other = vishsim(
        &[
            "simulate",
            "--per-level",
            "5",
            "--seed",
            "2",
            "--out",
            "c.log",
        ],
        dir.path(),
    );
    assert!(other.status.success());
    assert_ne!(std::fs::read(dir.path().join("c.log")).unwrap(), a);
}

#[test]
fn reports_read_the_log_and_write_json() {
    let dir = tempfile::tempdir().unwrap();
    assert!(vishsim(
        &["simulate", "--per-level", "10", "--seed", "4"],
        dir.path()
    )
    .status
    .success());

    let costs = vishsim(&["report", "costs", "--in", "records.log"], dir.path());
    assert!(costs.status.success(), "{}", stderr(&costs));
    let text = stdout(&costs);
    assert!(text.contains("successful") && text.contains("Total (cent)"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("records.log.costs.json")).unwrap())
            .unwrap();
    assert_eq!(json["columns"][0]["calls"], 40);

    let outcomes = vishsim(
        &[
            "report",
            "outcomes",
            "--in",
            "records.log",
            "--json",
            "o.json",
        ],
        dir.path(),
    );
    assert!(outcomes.status.success(), "{}", stderr(&outcomes));
    assert!(stdout(&outcomes).contains("Success per level"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(json["calls"], 40);
}

#[test]
fn empty_or_missing_logs_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.log"), "").unwrap();
    let o = vishsim(&["report", "costs", "--in", "empty.log"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no records in"), "{}", stderr(&o));

    let o = vishsim(&["report", "outcomes", "--in", "absent.log"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn bad_flags_and_config_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!vishsim(&["simulate", "--levels", "1,9"], dir.path())
        .status
        .success());
    assert!(
        !vishsim(&["simulate", "--scenario", "elsewhere"], dir.path())
            .status
            .success()
    );
    assert!(!vishsim(&["call", "--level", "7"], dir.path())
        .status
        .success());
    assert!(!vishsim(&["call", "--persona", "nobody"], dir.path())
        .status
        .success());

    let o = Command::new(env!("CARGO_BIN_EXE_vishsim"))
        .args(["call"])
        .env("VISHSIM_CONFIG", dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.toml"));
}

#[test]
fn scripted_call_prints_a_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let o = vishsim(
        &[
            "call",
            "--persona",
            "michael",
            "--level",
            "3",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("caller: Hello"));
    assert!(text.lines().last().unwrap().starts_with("outcome: "));
}

#[test]
fn interactive_disclosure_ends_in_disclosed() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_vishsim"))
        .args([
            "call",
            "--persona",
            "sophia",
            "--level",
            "3",
            "--interactive",
        ])
        .env_remove("VISHSIM_CONFIG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"Hello?\nOkay, my password is Inn0V4t3CH\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("caller: Hi, this is Sophia"));
    assert_eq!(text.lines().last(), Some("outcome: Disclosed"));
}
