mod common;

use hdlloop::driver::{CollectSink, NullSink};
use hdlloop::record::read_records;
use hdlloop::replay::{replay_log, replay_records};
use hdlloop::suite::Suite;
use hdlloop::toolchain::{ToolConfig, ToolMode};
use hdlloop_core::outcome::TerminalClass;

fn replay(path: &std::path::Path) -> hdlloop::replay::ReplayReport {
    replay_log(path, &Suite::builtin(), ToolMode::Recorded, &ToolConfig::default(), &NullSink).unwrap()
}

#[test]
fn every_fixture_log_reproduces() {
    let all: Vec<_> = common::logs("loop").into_iter().chain(common::logs("nfn")).collect();
    assert_eq!(all.len(), 13);
    for p in all {
        let r = replay(&p);
        assert!(r.reproduced(), "{}: {:?}", p.display(), r.differences);
        assert_eq!(r.tool_kind, "recorded");
        assert_eq!(r.recorded, r.replayed);
    }
}

#[test]
fn tampered_log_is_flagged() {
    let [p] = &common::logs("tampered")[..] else { panic!("expected one tampered log") };
    let r = replay(p);
    assert!(!r.reproduced());
    assert_eq!(r.recorded.as_ref().unwrap().terminal, TerminalClass::TF);
    assert_eq!(r.replayed.as_ref().unwrap().terminal, TerminalClass::NFN);
}

#[test]
fn loop_outcomes() {
    let expect = [
        ("lfsr_T1", TerminalClass::NFN, Some(true), 3),
        ("shift_register_T1", TerminalClass::TF, Some(true), 3),
        ("shift_register_T2", TerminalClass::SHF, Some(true), 5),
        ("shift_register_T3", TerminalClass::FAIL, None, 4),
        ("shift_register_T4", TerminalClass::FAIL, None, 1),
    ];
    for (name, class, compliant, messages) in expect {
        let p = common::fixtures().join("logs/loop").join(format!("{name}.ndjson"));
        let o = replay(&p).replayed.unwrap();
        assert_eq!((o.terminal, o.compliant, o.user_messages), (class, compliant, messages), "{name}");
    }
}

#[test]
fn nfn_logs_are_two_messages_and_compliant() {
    for p in common::logs("nfn") {
        let o = replay(&p).replayed.unwrap();
        assert_eq!((o.terminal, o.compliant, o.user_messages), (TerminalClass::NFN, Some(true), 2), "{}", p.display());
    }
}

#[test]
fn edited_design_misses_recorded_tools() {
    let p = common::fixtures().join("logs/loop/shift_register_T1.ndjson");
    let text = std::fs::read_to_string(&p).unwrap();
    let mut records = hdlloop::record::parse_records(&text).unwrap();
    let msg = records
        .iter_mut()
        .find_map(|r| match r {
            hdlloop::record::LogRecord::Message { message, .. } if message.content.contains("Here is") => Some(message),
            _ => None,
        })
        .unwrap();
    msg.content = msg.content.replacen("endmodule", "// edited\nendmodule", 1);
    let r = replay_records(&records, &Suite::builtin(), ToolMode::Recorded, &ToolConfig::default(), &NullSink).unwrap();
    assert!(!r.reproduced());
    assert!(r.differences.iter().any(|d| d.contains("diverged")), "{:?}", r.differences);
}

#[test]
fn replay_events_are_deterministic() {
    let p = common::fixtures().join("logs/loop/shift_register_T1.ndjson");
    let run = || {
        let sink = CollectSink(Default::default());
        replay_log(&p, &Suite::builtin(), ToolMode::Recorded, &ToolConfig::default(), &sink).unwrap();
        sink.events()
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run()).unwrap());
    assert!(read_records(&p).unwrap().len() > a.len() / 4);
}
