//! Binding a generated design to a golden testbench.
//!
//! Golden testbenches instantiate the benchmark id with canonical port names.
//! Generated designs often use another module name or aliased port names, so
//! a thin adapter module with the canonical header is emitted around them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::conformance::select_top;
use super::interface::{find_modules, Direction, InterfaceDesc};
use crate::bench::BenchmarkSpec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("design cannot be bound to the canonical interface: {}", evidence.join("; "))]
pub struct BindingError {
    pub evidence: Vec<String>,
}

/// A Verilog identifier, escaped when it is not a simple name.
pub fn verilog_ident(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$');
    if simple {
        name.to_string()
    } else {
        format!("\\{name} ")
    }
}

fn fresh_name(base: &str, taken: &[String]) -> String {
    let mut n = 0u32;
    loop {
        let cand = if n == 0 { format!("{base}_dut") } else { format!("{base}_dut{n}") };
        if !taken.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

/// Returns design source that exposes module `spec.id` with the canonical
/// ports, ready to compile next to the golden testbench.
pub fn bind_to_canonical(design: &str, spec: &BenchmarkSpec) -> Result<String, BindingError> {
    let Some((top, report)) = select_top(design, &spec.interface, &spec.id) else {
        return Err(BindingError { evidence: alloc::vec!["no module with ports in design".to_string()] });
    };
    if report.defect_count() > 0 {
        return Err(BindingError { evidence: report.describe() });
    }
    let identity = report.bindings.iter().all(|(c, f)| c == f);
    if top.module_name == spec.id && identity && report.extra.is_empty() {
        return Ok(design.to_string());
    }
    let spans = find_modules(design);
    let taken: Vec<String> = spans.iter().map(|s| s.name.clone()).collect();
    if spans.iter().any(|s| s.name == spec.id && s.name != top.module_name) {
        return Err(BindingError {
            evidence: alloc::vec![format!("module `{}` is defined but is not the design top", spec.id)],
        });
    }
    let mut source = design.to_string();
    let mut inner = top.module_name.clone();
    if top.module_name == spec.id {
        inner = fresh_name(&spec.id, &taken);
        let span = spans.iter().rev().find(|s| s.name == spec.id).expect("top span");
        source.replace_range(span.name_range.0..span.name_range.1, &inner);
    }
    if !source.ends_with('\n') {
        source.push('\n');
    }
    source.push('\n');
    source.push_str(&adapter_module(spec, &top, &inner, &report.bindings));
    Ok(source)
}

fn adapter_module(spec: &BenchmarkSpec, top: &InterfaceDesc, inner: &str, bindings: &[(String, String)]) -> String {
    let mut out = format!("module {} (\n", spec.id);
    let n = spec.interface.ports.len();
    for (i, p) in spec.interface.ports.iter().enumerate() {
        let range = if p.width > 1 { format!(" [{}:0]", p.width - 1) } else { String::new() };
        let sep = if i + 1 == n { "" } else { "," };
        out.push_str(&format!("    {} wire{} {}{}\n", p.direction.keyword(), range, p.name, sep));
    }
    out.push_str(");\n");
    let mut conns: Vec<String> = bindings
        .iter()
        .map(|(canon, found)| format!(".{}({})", verilog_ident(found), canon))
        .collect();
    for extra in top.ports.iter().filter(|p| !bindings.iter().any(|(_, f)| *f == p.name)) {
        if extra.direction == Direction::Input {
            conns.push(format!(".{}({}'d0)", verilog_ident(&extra.name), extra.width));
        } else {
            conns.push(format!(".{}()", verilog_ident(&extra.name)));
        }
    }
    out.push_str(&format!("    {} u_design (\n", verilog_ident(inner)));
    for (i, c) in conns.iter().enumerate() {
        let sep = if i + 1 == conns.len() { "" } else { "," };
        out.push_str(&format!("        {c}{sep}\n"));
    }
    out.push_str("    );\nendmodule\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::fixtures::shift_register;
    use crate::hdl::parse_module_interface;

    const CANON: &str = "module shift_register(input clk, input reset_n, input data_in, input shift_enable, output reg [7:0] data_out);\nendmodule\n";

    #[test]
    fn canonical_design_passes_through() {
        assert_eq!(bind_to_canonical(CANON, &shift_register()).unwrap(), CANON);
    }

    #[test]
    fn renamed_design_gets_adapter() {
        let src = "module ShiftRegister(input clk, input rst_n, input data_in, input shft_en, output reg [7:0] q);\nendmodule\n";
        let err = bind_to_canonical(src, &shift_register()).unwrap_err();
        assert!(err.evidence.iter().any(|e| e.contains("shift_enable")));
        let src = "module ShiftRegister(input clock, input rst_n, input data_in, input shift_enable, input dbg, output reg [7:0] q);\nendmodule\n";
        let out = bind_to_canonical(src, &shift_register()).unwrap();
        let mods = parse_module_interface(&out).unwrap();
        assert_eq!(mods.len(), 2);
        assert_eq!(mods[1].module_name, "shift_register");
        assert!(out.contains(".clock(clk)"));
        assert!(out.contains(".q(data_out)"));
        assert!(out.contains(".dbg(1'd0)"));
    }

    #[test]
    fn same_name_different_ports_is_renamed() {
        let src = "module shift_register(input clk, input reset_n, input data, input shift_enable, output reg [7:0] q);\nendmodule\n";
        let out = bind_to_canonical(src, &shift_register()).unwrap();
        assert!(out.starts_with("module shift_register_dut("));
        assert!(out.contains("shift_register_dut u_design"));
    }

    #[test]
    fn wrong_width_is_binding_evidence() {
        let src = "module shift_register(input clk, input rst, input [7:0] data, input shift_enable, output reg [7:0] data_out);\nendmodule\n";
        let err = bind_to_canonical(src, &shift_register()).unwrap_err();
        assert_eq!(err.evidence, ["width mismatch data: expected 1, found 8"]);
    }
}
