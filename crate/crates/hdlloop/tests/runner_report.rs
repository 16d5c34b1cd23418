mod common;

use std::fs;
use std::path::{Path, PathBuf};

use hdlloop::driver::NullSink;
use hdlloop::runner::{run_suite, BackendChoice, OperatorChoice, SuiteRunConfig, LOG_FILE, OUTCOME_FILE};
use hdlloop::suite::Suite;
use hdlloop::toolchain::{ToolConfig, ToolMode};
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::outcome::{ReportRow, TerminalClass};

fn config(transcripts: &Path, out: &Path, trials: u32) -> SuiteRunConfig {
    SuiteRunConfig {
        out_dir: out.to_path_buf(),
        trials,
        limits: LoopLimits::default(),
        tool_mode: ToolMode::Recorded,
        tools: ToolConfig::default(),
        backend: BackendChoice::Scripted(transcripts.to_path_buf()),
        operator: OperatorChoice::Transcript,
        resume: false,
        jobs: 2,
    }
}

/// Lays the shift-register loop logs out as `<dir>/shift_register/T<n>.ndjson`.
fn loop_transcripts(dir: &Path) -> PathBuf {
    let d = dir.join("transcripts");
    fs::create_dir_all(d.join("shift_register")).unwrap();
    for n in 1..=4 {
        let src = common::fixtures().join(format!("logs/loop/shift_register_T{n}.ndjson"));
        fs::copy(src, d.join(format!("shift_register/T{n}.ndjson"))).unwrap();
    }
    d
}

#[test]
fn nfn_suite_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let report = run_suite(&Suite::builtin(), &config(&common::fixtures().join("logs/nfn"), &out, 1), &NullSink).unwrap();
    assert_eq!(report.rows.len(), 8);
    assert_eq!(report.totals.passed, 8);
    assert_eq!(report.totals.compliant, 8);
    for row in &report.rows {
        let ReportRow::Completed(o) = row else { panic!("{row:?}") };
        assert_eq!((o.terminal, o.user_messages), (TerminalClass::NFN, 2));
        let dir = out.join(&o.benchmark_id).join("T1");
        for f in [LOG_FILE, OUTCOME_FILE, "design.v", "testbench.v"] {
            assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
        }
    }
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("Compliance rate: 100.0%"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("bin2bcd") && l.contains("NFN") && l.contains("Yes") && l.trim_end().ends_with('2')));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("| Benchmark |"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["backend"], "scripted");
}

#[test]
fn written_logs_match_fixture_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let transcripts = loop_transcripts(tmp.path());
    let out = tmp.path().join("out");
    let suite = Suite::builtin().subset(&["shift_register".to_string()]).unwrap();
    let report = run_suite(&suite, &config(&transcripts, &out, 4), &NullSink).unwrap();
    let classes: Vec<_> = report
        .rows
        .iter()
        .map(|r| match r {
            ReportRow::Completed(o) => (o.terminal, o.compliant, o.user_messages),
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(
        classes,
        [
            (TerminalClass::TF, Some(true), 3),
            (TerminalClass::SHF, Some(true), 5),
            (TerminalClass::FAIL, None, 4),
            (TerminalClass::FAIL, None, 1)
        ]
    );
    for n in 1..=4 {
        let written = fs::read_to_string(out.join(format!("shift_register/T{n}/{LOG_FILE}"))).unwrap();
        let fixture = fs::read_to_string(transcripts.join(format!("shift_register/T{n}.ndjson"))).unwrap();
        assert_eq!(written, fixture, "T{n}");
    }
}

#[test]
fn resume_reuses_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let suite = Suite::builtin().subset(&["bin2bcd".to_string()]).unwrap();
    let mut cfg = config(&common::fixtures().join("logs/nfn"), &out, 1);
    let first = run_suite(&suite, &cfg, &NullSink).unwrap();
    fs::remove_file(out.join("bin2bcd/T1").join(LOG_FILE)).unwrap();
    cfg.resume = true;
    let second = run_suite(&suite, &cfg, &NullSink).unwrap();
    assert_eq!(first.rows, second.rows);
    assert!(!out.join("bin2bcd/T1").join(LOG_FILE).exists());
}

#[test]
fn missing_tools_skip_with_environment_status() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(&common::fixtures().join("logs/nfn"), &tmp.path().join("out"), 1);
    cfg.tool_mode = ToolMode::Live;
    cfg.tools.iverilog = Some(tmp.path().join("no-such-iverilog"));
    let suite = Suite::builtin().subset(&["abro".to_string()]).unwrap();
    let report = run_suite(&suite, &cfg, &NullSink).unwrap();
    assert!(matches!(&report.rows[..], [ReportRow::SkippedEnv { .. }]));
    assert_eq!(report.totals.skipped_env, 1);
    assert!(fs::read_to_string(tmp.path().join("out/report.txt")).unwrap().contains("SKIPPED (environment)"));
}

#[test]
fn missing_transcript_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &tmp.path().join("out"), 1);
    let suite = Suite::builtin().subset(&["abro".to_string()]).unwrap();
    assert!(run_suite(&suite, &cfg, &NullSink).is_err());
}
