mod common;

use std::fs;

use hdlloop::record::read_records;
use hdlloop::suite::Suite;
use hdlloop_core::hdl::conformance::ConformanceReport;
use hdlloop_core::hdl::{check_interface, parse_module_interface};

fn check(file: &str) -> ConformanceReport {
    let suite = Suite::builtin();
    let spec = suite.get("shift_register").unwrap();
    let text = fs::read_to_string(common::fixtures().join("spec_gate").join(file)).unwrap();
    let found = parse_module_interface(&text).unwrap();
    check_interface(&found[0], &spec.interface)
}

#[test]
fn aliased_port_names_conform() {
    let r = check("aliased.v");
    assert!(r.conforms, "{:?}", r.describe());
    assert!(r.bindings.iter().any(|(canon, found)| canon == "data_out" && found == "q"));
}

#[test]
fn missing_reset_is_reported() {
    let r = check("no_reset.v");
    assert!(!r.conforms);
    assert_eq!(r.missing.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), ["reset_n"]);
}

#[test]
fn garbled_module_fails_on_names() {
    let r = check("garbled.v");
    assert!(!r.conforms);
    assert!(r.missing.iter().any(|p| p.name == "shift_enable"), "{:?}", r.describe());
    assert!(r.extra.contains(&"shft_en".to_string()));
}

#[test]
fn wide_data_describes_one_defect() {
    assert_eq!(check("wide_data.v").describe(), ["width mismatch data: expected 1, found 8"]);
}

#[test]
fn t1_log_carries_the_plain_sources() {
    let dir = common::fixtures().join("shift_register_t1");
    let records = read_records(&common::fixtures().join("logs/loop/shift_register_T1.ndjson")).unwrap();
    let assistant: Vec<String> = hdlloop::record::conversation_from_records(&records)
        .messages
        .into_iter()
        .filter(|m| m.role == hdlloop_core::conversation::Role::Assistant)
        .map(|m| m.content)
        .collect();
    assert_eq!(assistant.len(), 3);
    for (i, file) in ["design.v", "tb_buggy.v", "tb_fixed.v"].into_iter().enumerate() {
        let src = fs::read_to_string(dir.join(file)).unwrap();
        assert!(assistant[i].contains(src.trim()), "{file}");
    }
}

#[test]
fn aliased_design_is_compliant_when_tools_exist() {
    let Some(tools) = common::live_tools() else {
        eprintln!("no simulator found; skipping");
        return;
    };
    let suite = Suite::builtin();
    let spec = suite.get("shift_register").unwrap();
    let design = fs::read_to_string(common::fixtures().join("spec_gate/aliased.v")).unwrap();
    let c = hdlloop::compliance::check_compliance(spec, &design, suite.golden_testbench(spec), tools.as_ref(), &Default::default()).unwrap();
    assert!(c.compliant, "{:?}", c.evidence);
    let bad = fs::read_to_string(common::fixtures().join("spec_gate/no_reset.v")).unwrap();
    let c = hdlloop::compliance::check_compliance(spec, &bad, suite.golden_testbench(spec), tools.as_ref(), &Default::default()).unwrap();
    assert!(!c.compliant);
    assert_eq!(c.tool_invocations, 0);
}
