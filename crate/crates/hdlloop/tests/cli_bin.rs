mod common;

use std::process::{Command, Output};

fn hdlloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdlloop")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn replay_exit_codes() {
    let good = common::fixtures().join("logs/loop/shift_register_T1.ndjson");
    let o = hdlloop(&["replay", "--tools", "recorded", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("reproduced: outcome TF"));

    let bad = common::logs("tampered").remove(0);
    let o = hdlloop(&["replay", "--tools", "recorded", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("NOT reproduced"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(hdlloop(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(hdlloop(&["prompt", "no_such_bench"]).status.code(), Some(1));
    assert_eq!(hdlloop(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_simulator_exits_two_with_a_hint() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let nfn = common::fixtures().join("logs/nfn");
    let o = hdlloop(&[
        "run",
        "--transcripts",
        nfn.to_str().unwrap(),
        "--bench",
        "abro",
        "--tools",
        "live",
        "--iverilog",
        "/nonexistent/iverilog",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("iverilog"));
    assert!(stdout(&o).contains("SKIPPED (environment)"));
}

#[test]
fn scripted_run_prints_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let nfn = common::fixtures().join("logs/nfn");
    let o = hdlloop(&["run", "--transcripts", nfn.to_str().unwrap(), "--bench", "bin2bcd", "--tools", "recorded", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("Benchmark") && text.contains("# Messages"));
    assert!(text.lines().any(|l| l.starts_with("bin2bcd") && l.contains("NFN")));
    assert!(out.join("report.json").is_file());
}

#[test]
fn suite_and_prompt_commands() {
    let o = hdlloop(&["suite", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 8);
    let o = hdlloop(&["prompt", "shift_register"]);
    assert!(stdout(&o).starts_with("I am trying to create a Verilog model for a shift register."));
    let tmp = tempfile::tempdir().unwrap();
    let o = hdlloop(&["suite", "export", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("suite.toml").is_file());
}

#[test]
fn wrapper_generate_writes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hdlloop(&["wrapper", "generate", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["wrapper.v", "pinout.md", "wrapper_harness.v"] {
        assert!(tmp.path().join(f).is_file());
    }
}
