//! One status line per acceptance criterion. Criteria that need the Verilog
//! simulator report `environment` when it cannot be found.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use hdlloop::driver::{run_conversation, NullSink, RunSetup, ScriptedOperator};
use hdlloop::record::Transcript;
use hdlloop::replay::replay_log;
use hdlloop::session::{ScriptedBackend, Session, SessionMeta};
use hdlloop::suite::Suite;
use hdlloop::toolchain::{run_pair, Cassette, SourceFile, ToolConfig, ToolMode, ToolRunner};
use hdlloop::wrapper_cmd::{generate, mutation_check, validate};
use hdlloop_core::audit::{explore, run_choices, Choice};
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::hdl::conformance::WidthMismatch;
use hdlloop_core::hdl::{check_interface, parse_module_interface};
use hdlloop_core::outcome::{FailReason, TerminalClass};
use hdlloop_core::verdict::{classify_sim, fingerprint_compile, fingerprint_sim, CompileResult, ErrorPatterns, SimResult};
use hdlloop_core::wrapper::{HarnessOptions, PinMap};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

enum Status {
    Pass(String),
    Environment(String),
}

/// `Err` carries the reason a criterion failed.
type Check = Result<Status, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn pass(detail: impl Into<String>) -> Check {
    Ok(Status::Pass(detail.into()))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    ensure(start.elapsed() < limit, || format!("took {:.1?}, limit {:?}", start.elapsed(), limit))
}

fn probe_lines(out: &str) -> Vec<Vec<u32>> {
    out.lines()
        .filter_map(|l| l.strip_prefix("PROBE "))
        .map(|l| l.split_whitespace().map(|v| v.parse().expect("probe values are decimal")).collect())
        .collect()
}

fn run_probe(tools: &dyn ToolRunner, suite: &Suite, bench: &str, probe: &str) -> Result<Vec<Vec<u32>>, String> {
    let spec = suite.get(bench).map_err(|e| e.to_string())?;
    let sources = [SourceFile::new(spec.golden_design.clone(), suite.golden_design(spec)), SourceFile::new("probe.v", probe)];
    let run = run_pair(tools, &sources, Some("probe"), &ErrorPatterns::default()).map_err(|e| e.to_string())?;
    let (sim, _) = run.sim.ok_or_else(|| format!("{bench} probe did not compile: {}", run.compile.feedback_text))?;
    Ok(probe_lines(&sim.raw_output))
}

const BIN2BCD_PROBE: &str = "`timescale 1ns/1ps
module probe;
reg [4:0] binary_in;
wire [7:0] bcd_out;
integer i;
bin2bcd dut(.binary_in(binary_in), .bcd_out(bcd_out));
initial begin
    for (i = 0; i < 32; i = i + 1) begin
        binary_in = i;
        #1;
        $display(\"PROBE %0d %0d\", i, bcd_out);
    end
    $finish;
end
endmodule
";

fn clocked_probe(module: &str, extra_regs: &str, extra_ports: &str, samples: u32) -> String {
    format!(
        "`timescale 1ns/1ps
module probe;
reg clk = 0;
reg reset_n = 0;
{extra_regs}
wire [7:0] data_out;
integer i;
{module} dut(.clk(clk), .reset_n(reset_n){extra_ports}, .data_out(data_out));
always #5 clk = ~clk;
initial begin
    #12 reset_n = 1;
    for (i = 0; i < {samples}; i = i + 1) begin
        @(negedge clk);
        $display(\"PROBE %0d\", data_out);
    end
    $finish;
end
endmodule
"
    )
}

fn smallest_period(seq: &[u32]) -> Option<usize> {
    (1..=seq.len() / 2).find(|&p| (0..seq.len() - p).all(|i| seq[i] == seq[i + p]))
}

fn corpus_oracle(tools: Option<&Arc<dyn ToolRunner>>) -> Check {
    let Some(tools) = tools else { return Ok(Status::Environment("iverilog/vvp not found".into())) };
    let start = Instant::now();
    let suite = Suite::builtin();
    for spec in &suite.benchmarks {
        let sources = [
            SourceFile::new(spec.golden_design.clone(), suite.golden_design(spec)),
            SourceFile::new(spec.golden_testbench.clone(), suite.golden_testbench(spec)),
        ];
        let run = run_pair(tools.as_ref(), &sources, None, &ErrorPatterns::default()).map_err(|e| e.to_string())?;
        ensure(run.passed(), || format!("{} golden failed: {:?}", spec.id, run.evidence()))?;
        let (sim, _) = run.sim.as_ref().expect("passed runs simulated");
        ensure(sim.error_lines.is_empty(), || format!("{} printed error lines", spec.id))?;
    }

    let table = run_probe(tools.as_ref(), &suite, "bin2bcd", BIN2BCD_PROBE)?;
    let expected: Vec<Vec<u32>> = (0..32).map(|i| vec![i, ((i / 10) << 4) | (i % 10)]).collect();
    ensure(table == expected, || format!("bin2bcd table differs: {table:?}"))?;

    let lfsr: Vec<u32> = run_probe(tools.as_ref(), &suite, "lfsr", &clocked_probe("lfsr", "", "", 300))?.into_iter().map(|v| v[0]).collect();
    let distinct = lfsr.iter().collect::<BTreeSet<_>>().len();
    ensure(lfsr.len() == 300 && distinct == 255, || format!("lfsr visited {distinct} distinct states in {} samples", lfsr.len()))?;

    let seq: Vec<u32> = run_probe(tools.as_ref(), &suite, "seq_gen", &clocked_probe("seq_gen", "reg enable = 1;", ", .enable(enable)", 40))?
        .into_iter()
        .map(|v| v[0])
        .collect();
    let period = smallest_period(&seq);
    ensure(seq.len() == 40 && period == Some(8), || format!("seq_gen period {period:?}"))?;
    within(Duration::from_secs(30), start)?;
    pass(format!("8 goldens pass; bin2bcd 32/32; lfsr 255 states; seq_gen period 8; {:.1?}", start.elapsed()))
}

fn replay_expect(rel: &str, class: TerminalClass, messages: u32) -> Check {
    let p = common::fixtures().join(rel);
    let r = replay_log(&p, &Suite::builtin(), ToolMode::Recorded, &ToolConfig::default(), &NullSink).map_err(|e| e.to_string())?;
    ensure(r.reproduced(), || format!("{:?}", r.differences))?;
    let o = r.replayed.ok_or("no outcome")?;
    ensure((o.terminal, o.compliant, o.user_messages) == (class, Some(true), messages), || format!("{o:?}"))?;
    pass(format!("{} {} compliant, {} messages", o.benchmark_id, o.terminal, o.user_messages))
}

fn spec_gate() -> Check {
    let suite = Suite::builtin();
    let spec = suite.get("shift_register").map_err(|e| e.to_string())?;
    let wide = std::fs::read_to_string(common::fixtures().join("spec_gate/wide_data.v")).map_err(|e| e.to_string())?;
    let found = parse_module_interface(&wide).map_err(|e| e.to_string())?;
    let r = check_interface(&found[0], &spec.interface);
    let expected = [WidthMismatch { port: "data_in".into(), found_name: "data".into(), expected: 1, found: 8 }];
    ensure(!r.conforms && r.width_mismatches == expected && r.defect_count() == 1, || format!("{r:?}"))?;

    let transcript = Transcript::load(&common::fixtures().join("logs/loop/shift_register_T4.ndjson")).map_err(|e| e.to_string())?;
    let limits = LoopLimits::default();
    let meta = SessionMeta { conversation_id: "gate".into(), benchmark_id: spec.id.clone(), trial_label: "T4".into(), limits };
    let mut session = Session::open(&meta, Box::new(ScriptedBackend::new(&transcript)), None).map_err(|e| e.to_string())?;
    let no_tools = Cassette::new(Vec::new());
    let patterns = ErrorPatterns::default();
    let setup = RunSetup { spec, golden_testbench: Some(suite.golden_testbench(spec)), tools: &no_tools, patterns: &patterns, limits };
    let mut operator = ScriptedOperator { actions: Default::default() };
    let res = run_conversation(&setup, &mut session, &mut operator, &NullSink).map_err(|e| e.to_string())?;
    let takes = res.conversation.messages.iter().filter(|m| m.role == hdlloop_core::conversation::Role::Assistant).count();
    ensure(res.outcome.terminal == TerminalClass::FAIL && res.tool_invocations == 0 && takes == 6, || {
        format!("{:?}, {} tool invocations, {takes} takes", res.outcome.terminal, res.tool_invocations)
    })?;
    ensure(matches!(res.state.fail_reason, Some(FailReason::RegenerationsExhausted)), || format!("{:?}", res.state.fail_reason))?;
    pass("one width mismatch (data: expected 1, found 8); 6 takes -> FAIL, 0 tool runs")
}

fn mixed_output() -> Check {
    let log = std::fs::read_to_string(common::fixtures().join("logs/loop/shift_register_T1.ndjson")).map_err(|e| e.to_string())?;
    let recorded = Transcript::from_records(&hdlloop::record::parse_records(&log).map_err(|e| e.to_string())?);
    let first_sim = recorded
        .tools
        .iter()
        .find(|t| t.phase == hdlloop_core::verdict::ToolPhase::Simulate)
        .ok_or("no simulation in log")?;
    let r = SimResult::from_output(first_sim.exit_status, first_sim.output.clone(), false, &ErrorPatterns::default());
    ensure(r.error_lines.len() == 3 && r.saw_pass_banner, || format!("{} error lines, banner {}", r.error_lines.len(), r.saw_pass_banner))?;
    let v = classify_sim(&r);
    ensure(!v.passed, || "classified as passing".into())?;
    pass("3 error lines + pass banner -> FAIL")
}

fn state_machine() -> Check {
    let start = Instant::now();
    let choice = prop_oneof![
        6 => Just(Choice::Good),
        1 => Just(Choice::Truncated),
        3 => Just(Choice::Conform(false)),
        4 => Just(Choice::Pass),
        6 => (0u8..3).prop_map(Choice::Fail),
        1 => Just(Choice::Human),
        1 => Just(Choice::Abort),
    ];
    let limits = (0u32..6, 2u32..30, 1u32..5, 1u32..4, 0u32..4, any::<bool>()).prop_map(|(r, m, t, h, c, cc)| LoopLimits {
        max_regenerations: r,
        max_user_messages: m,
        identical_error_threshold: t,
        per_human_level_attempts: h,
        max_continuations: c,
        count_continuations: cc,
    });
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(limits, prop::collection::vec(choice, 0..400)), |(l, cs)| {
            run_choices(&l, &cs).map(|_| ()).map_err(|v| proptest::test_runner::TestCaseError::fail(v.to_string()))
        })
        .map_err(|e| e.to_string())?;
    let mut paths = 0;
    for cap in 1..=6 {
        for count_continuations in [true, false] {
            let l = LoopLimits {
                max_regenerations: 2,
                max_user_messages: cap,
                identical_error_threshold: 2,
                per_human_level_attempts: 1,
                max_continuations: 1,
                count_continuations,
            };
            paths += explore(&l, 200).map_err(|v| format!("cap {cap}: {v}"))?;
        }
    }
    within(Duration::from_secs(60), start)?;
    pass(format!("10000 random runs, {paths} exhaustive runs at caps 1..=6, 0 violations, {:.1?}", start.elapsed()))
}

fn fingerprints() -> Check {
    let patterns = ErrorPatterns::default();
    let mut runner = TestRunner::new(Config { cases: 100, failure_persistence: None, ..Config::default() });
    let mutation = (1u32..5000, 0usize..4, any::<u8>(), "[a-z]{1,8}", 1u32..40);
    runner
        .run(&mutation, |(line, pad, got, dir, case)| {
            let compile = |path: &str, line: u32, pad: usize, got: u32| {
                let text = format!("{path}:{line}:{} error: port width mismatch on data_out, found {got};\n", " ".repeat(pad));
                fingerprint_compile(&CompileResult::from_output(1, text))
            };
            prop_assert_eq!(compile("design.v", 7, 0, 1), compile(&format!("/tmp/{dir}/design.v"), line, pad, got as u32));
            let sim = |pad: usize, got: u8| {
                let text = format!("Error: Test case {case} failed.{}Expected: 10000000, Received: {got:08b}\n", " ".repeat(pad + 1));
                fingerprint_sim(&SimResult::from_output(0, text, false, &patterns))
            };
            prop_assert_eq!(sim(0, 0x7f), sim(pad, got));
            let same = format!("design.v:{line}: error: Unknown module type: {dir}\n");
            let c = fingerprint_compile(&CompileResult::from_output(1, same.clone()));
            let s = fingerprint_sim(&SimResult::from_output(1, same, false, &patterns));
            prop_assert_ne!(c, s);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    pass("100 mutated compile and simulation diagnostics keep their fingerprints; cross-phase text never collides")
}

fn wrapper(tools: Option<&Arc<dyn ToolRunner>>) -> Check {
    let Some(tools) = tools else { return Ok(Status::Environment("iverilog/vvp not found".into())) };
    let start = Instant::now();
    let suite = Suite::builtin();
    let w = generate(&suite.benchmarks, &PinMap::default()).map_err(|e| e.to_string())?;
    let opts = HarnessOptions::default();
    let report = validate(&suite, &suite.benchmarks, &w, &opts, tools.as_ref()).map_err(|e| e.to_string())?;
    ensure(report.ok(), || format!("failing selects {:?}: {:?}", report.failing_selects(), report.mismatches.first()))?;
    let muts = mutation_check(&suite, &suite.benchmarks, &w, &opts, tools.as_ref()).map_err(|e| e.to_string())?;
    ensure(muts.len() == 2 && muts.iter().all(|m| m.detected), || format!("{muts:?}"))?;
    within(Duration::from_secs(60), start)?;
    pass(format!("8-benchmark wrapper matches every select; 2/2 mutations detected; {:.1?}", start.elapsed()))
}

fn replay_closure() -> Check {
    let replay = |p: &Path| replay_log(p, &Suite::builtin(), ToolMode::Recorded, &ToolConfig::default(), &NullSink).map_err(|e| format!("{}: {e}", p.display()));
    let logs: Vec<_> = common::logs("loop").into_iter().chain(common::logs("nfn")).collect();
    for p in &logs {
        let r = replay(p)?;
        ensure(r.reproduced(), || format!("{}: {:?}", p.display(), r.differences))?;
    }
    let tampered = common::logs("tampered");
    for p in &tampered {
        ensure(!replay(p)?.reproduced(), || format!("{} was not flagged", p.display()))?;
    }
    pass(format!("{} logs reproduced byte-for-byte; {} tampered log flagged", logs.len(), tampered.len()))
}

fn main() -> ExitCode {
    let tools = common::live_tools();
    let criteria: Vec<Criterion<'_>> = vec![
        ("corpus oracle", Box::new(|| corpus_oracle(tools.as_ref()))),
        ("shift register T1 replay", Box::new(|| replay_expect("logs/loop/shift_register_T1.ndjson", TerminalClass::TF, 3))),
        ("NFN shape", Box::new(|| replay_expect("logs/nfn/bin2bcd.ndjson", TerminalClass::NFN, 2))),
        ("spec gate", Box::new(spec_gate)),
        ("mixed output classification", Box::new(mixed_output)),
        ("state machine properties", Box::new(state_machine)),
        ("fingerprint stability", Box::new(fingerprints)),
        ("wrapper differential", Box::new(|| wrapper(tools.as_ref()))),
        ("replay closure", Box::new(replay_closure)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (tag, detail) = match check() {
            Ok(Status::Pass(d)) => ("pass", d),
            Ok(Status::Environment(d)) => ("environment", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("acceptance: {name:<28} {tag:<11} {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
