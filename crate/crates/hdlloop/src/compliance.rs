//! Post-loop check of a passing design against the benchmark's golden testbench.

use hdlloop_core::bench::BenchmarkSpec;
use hdlloop_core::hdl::adapter::bind_to_canonical;
use hdlloop_core::verdict::ErrorPatterns;

use crate::toolchain::{run_pair, SourceFile, ToolError, ToolRecord, ToolRunner};

pub const BOUND_DESIGN_FILE: &str = "design_bound.v";
pub const GOLDEN_TB_FILE: &str = "golden_tb.v";

#[derive(Debug, Clone, PartialEq)]
pub struct Compliance {
    pub compliant: bool,
    pub evidence: Vec<String>,
    pub records: Vec<ToolRecord>,
    pub tool_invocations: usize,
}

/// Compiles the design, bound to the canonical module header, with the golden
/// testbench and simulates it. A design that cannot be bound is
/// non-compliant without running any tool.
pub fn check_compliance(
    spec: &BenchmarkSpec,
    design: &str,
    golden_testbench: &str,
    tools: &dyn ToolRunner,
    patterns: &ErrorPatterns,
) -> Result<Compliance, ToolError> {
    let bound = match bind_to_canonical(design, spec) {
        Ok(b) => b,
        Err(e) => return Ok(Compliance { compliant: false, evidence: e.evidence, records: Vec::new(), tool_invocations: 0 }),
    };
    let sources = [SourceFile::new(BOUND_DESIGN_FILE, bound), SourceFile::new(GOLDEN_TB_FILE, golden_testbench)];
    let run = run_pair(tools, &sources, None, patterns)?;
    let tool_invocations = run.records.len();
    Ok(Compliance { compliant: run.passed(), evidence: run.evidence(), records: run.records, tool_invocations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::Suite;
    use crate::toolchain::Cassette;

    #[test]
    fn unbindable_design_is_non_compliant_without_tools() {
        let suite = Suite::builtin();
        let spec = suite.get("shift_register").unwrap();
        let c = check_compliance(spec, "module x(input a); endmodule", "", &Cassette::default(), &ErrorPatterns::default()).unwrap();
        assert!(!c.compliant);
        assert_eq!(c.tool_invocations, 0);
        assert!(c.evidence.iter().any(|e| e.contains("missing port")));
    }
}
