//! The spec gate: does a generated module expose the requested ports?

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::interface::{find_modules, instantiated_modules, parse_module_interface, InterfaceDesc, PortDesc};
use crate::bench::{normalize_name, InterfaceSpec, PortSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthMismatch {
    /// Canonical spec port name.
    pub port: String,
    /// Name the port carries in the generated module.
    pub found_name: String,
    pub expected: u32,
    pub found: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub conforms: bool,
    pub missing: Vec<PortSpec>,
    pub extra: Vec<String>,
    pub width_mismatches: Vec<WidthMismatch>,
    pub direction_mismatches: Vec<String>,
    /// Canonical spec port name to the matched found port name.
    pub bindings: Vec<(String, String)>,
}

impl ConformanceReport {
    pub fn defect_count(&self) -> usize {
        self.missing.len() + self.width_mismatches.len() + self.direction_mismatches.len()
    }

    /// One line per defect, suitable for logs and compliance evidence.
    pub fn describe(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.missing {
            out.push(alloc::format!("missing port {} ({} {} bit)", p.name, p.direction, p.width));
        }
        for w in &self.width_mismatches {
            out.push(alloc::format!("width mismatch {}: expected {}, found {}", w.found_name, w.expected, w.found));
        }
        for d in &self.direction_mismatches {
            out.push(alloc::format!("direction mismatch {d}"));
        }
        for e in &self.extra {
            out.push(alloc::format!("extra port {e}"));
        }
        out
    }
}

/// Non-strict check: extra ports are reported but allowed.
pub fn check_interface(found: &InterfaceDesc, spec: &InterfaceSpec) -> ConformanceReport {
    check_interface_with(found, spec, false)
}

pub fn check_interface_with(found: &InterfaceDesc, spec: &InterfaceSpec, fail_on_extra: bool) -> ConformanceReport {
    let mut used = alloc::vec![false; found.ports.len()];
    let mut report = ConformanceReport {
        conforms: false,
        missing: Vec::new(),
        extra: Vec::new(),
        width_mismatches: Vec::new(),
        direction_mismatches: Vec::new(),
        bindings: Vec::new(),
    };
    let normalized: Vec<String> = found.ports.iter().map(|p| normalize_name(&p.name)).collect();
    // Exact names are claimed first so an alias can never steal a port that
    // another spec entry names directly.
    let mut matches: Vec<Option<usize>> = spec
        .ports
        .iter()
        .map(|sp| {
            let idx = found.ports.iter().position(|p| p.name == sp.name)?;
            used[idx] = true;
            Some(idx)
        })
        .collect();
    for (k, sp) in spec.ports.iter().enumerate() {
        if matches[k].is_some() {
            continue;
        }
        let accepted = spec.accepted_names(&sp.name);
        let idx = accepted
            .iter()
            .find_map(|name| (0..found.ports.len()).find(|&i| !used[i] && &normalized[i] == name));
        if let Some(i) = idx {
            used[i] = true;
        }
        matches[k] = idx;
    }
    for (sp, m) in spec.ports.iter().zip(&matches) {
        let Some(i) = *m else {
            report.missing.push(sp.clone());
            continue;
        };
        let fp: &PortDesc = &found.ports[i];
        report.bindings.push((sp.name.clone(), fp.name.clone()));
        if fp.direction != sp.direction {
            report.direction_mismatches.push(fp.name.clone());
        }
        if fp.width != sp.width {
            report.width_mismatches.push(WidthMismatch {
                port: sp.name.clone(),
                found_name: fp.name.clone(),
                expected: sp.width,
                found: fp.width,
            });
        }
    }
    report.extra = found.ports.iter().zip(&used).filter(|(_, u)| !**u).map(|(p, _)| p.name.clone()).collect();
    report.conforms = report.defect_count() == 0 && (!fail_on_extra || report.extra.is_empty());
    report
}

/// Picks the module in `source` that should be judged against `spec`:
/// the best-conforming module with ports, preferring one whose name matches
/// `preferred_name`, then one not instantiated by another module.
pub fn select_top(source: &str, spec: &InterfaceSpec, preferred_name: &str) -> Option<(InterfaceDesc, ConformanceReport)> {
    let mods = parse_module_interface(source).ok()?;
    let spans = find_modules(source);
    let names: Vec<&str> = mods.iter().map(|m| m.module_name.as_str()).collect();
    let mut instantiated: Vec<String> = Vec::new();
    for s in &spans {
        instantiated.extend(instantiated_modules(source, s, &names));
    }
    let want = normalize_name(preferred_name);
    mods.into_iter()
        .filter(|m| !m.ports.is_empty())
        .map(|m| {
            let r = check_interface(&m, spec);
            (m, r)
        })
        .min_by_key(|(m, r)| {
            (
                r.defect_count(),
                normalize_name(&m.module_name) != want,
                instantiated.contains(&m.module_name),
            )
        })
}

/// Convenience gate used by the engine driver: parses `source`, selects the
/// top module and returns its report. A source with no port-bearing module
/// yields a report where every spec port is missing.
pub fn gate(source: &str, spec: &InterfaceSpec, preferred_name: &str) -> ConformanceReport {
    match select_top(source, spec, preferred_name) {
        Some((_, r)) => r,
        None => check_interface(&InterfaceDesc { module_name: preferred_name.to_string(), ports: Vec::new() }, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::fixtures::shift_register;
    use crate::hdl::Direction;

    const WIDE_DATA_DESIGN: &str = "module shift_register (\n  input clk,\n  input rst,\n  input [7:0] data,\n  input shift_enable,\n  output reg [7:0] data_out\n);\n\n  always @(posedge clk or posedge rst) begin\n    if (rst) begin\n      data_out <= 8'b0;\n    end else begin\n      if (shift_enable) begin\n        data_out <= {data_out[6:0], data};\n      end\n    end\n  end\n\nendmodule\n";

    fn spec_as_desc(spec: &InterfaceSpec) -> InterfaceDesc {
        InterfaceDesc {
            module_name: "m".to_string(),
            ports: spec
                .ports
                .iter()
                .map(|p| PortDesc { name: p.name.clone(), direction: p.direction, width: p.width, is_reg: false })
                .collect(),
        }
    }

    #[test]
    fn wide_data_design_has_one_width_mismatch() {
        let spec = shift_register().interface;
        let found = &parse_module_interface(WIDE_DATA_DESIGN).unwrap()[0];
        let r = check_interface(found, &spec);
        assert!(!r.conforms);
        assert_eq!(
            r.width_mismatches,
            [WidthMismatch { port: "data_in".to_string(), found_name: "data".to_string(), expected: 1, found: 8 }]
        );
        assert!(r.missing.is_empty() && r.direction_mismatches.is_empty() && r.extra.is_empty());
        assert_eq!(r.describe(), ["width mismatch data: expected 1, found 8"]);
    }

    #[test]
    fn identity_conforms() {
        let spec = shift_register().interface;
        let r = check_interface(&spec_as_desc(&spec), &spec);
        assert!(r.conforms);
        assert_eq!(r.bindings.len(), 5);
    }

    #[test]
    fn extra_ports_only_fail_when_strict() {
        let spec = shift_register().interface;
        let mut d = spec_as_desc(&spec);
        d.ports.push(PortDesc { name: "debug".to_string(), direction: Direction::Output, width: 1, is_reg: false });
        assert!(check_interface(&d, &spec).conforms);
        let strict = check_interface_with(&d, &spec, true);
        assert!(!strict.conforms);
        assert_eq!(strict.extra, ["debug"]);
    }

    #[test]
    fn missing_and_direction() {
        let spec = shift_register().interface;
        let mut d = spec_as_desc(&spec);
        d.ports.remove(3);
        d.ports[0].direction = Direction::Output;
        let r = check_interface(&d, &spec);
        assert_eq!(r.missing.len(), 1);
        assert_eq!(r.missing[0].name, "shift_enable");
        assert_eq!(r.direction_mismatches, ["clk"]);
    }

    #[test]
    fn aliases_and_case() {
        let spec = shift_register().interface;
        let src = "module ShiftRegister(input CLOCK, input rst_n, input Data_In, input shift_enable, output reg [7:0] q);\nendmodule";
        let found = &parse_module_interface(src).unwrap()[0];
        assert!(check_interface(found, &spec).conforms);
    }

    #[test]
    fn top_selection_prefers_conforming() {
        let spec = shift_register().interface;
        let src = alloc::format!("module helper(input a, output b); endmodule\n{WIDE_DATA_DESIGN}");
        let (top, r) = select_top(&src, &spec, "shift_register").unwrap();
        assert_eq!(top.module_name, "shift_register");
        assert_eq!(r.width_mismatches.len(), 1);
        assert_eq!(gate("module tb; endmodule", &spec, "shift_register").missing.len(), 5);
    }
}
