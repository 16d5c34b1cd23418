//! Multiplexed top-level wrapper for an 8-in/8-out shared tapeout slot.
//!
//! Three input bits select one of up to eight benchmark instances. Every
//! instance sees the clock and shared input pins at all times; only the
//! output bus is multiplexed. The wrapper's reset pin is active-high and
//! active-low benchmark resets receive an inverter.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{BenchmarkSpec, PortRole, TAPEOUT_OUTPUT_BITS, TAPEOUT_SLOTS};
use crate::hdl::adapter::verilog_ident;
use crate::hdl::Direction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinMap {
    /// Select field pins, least significant first.
    pub select_bits: [u8; 3],
    pub clock_bit: u8,
    pub shared_inputs: [u8; 4],
    /// Optional explicit pins per benchmark id and port (LSB first).
    #[serde(default)]
    pub assignments: BTreeMap<String, BTreeMap<String, Vec<u8>>>,
}

impl Default for PinMap {
    fn default() -> Self {
        PinMap { select_bits: [5, 6, 7], clock_bit: 0, shared_inputs: [1, 2, 3, 4], assignments: BTreeMap::new() }
    }
}

impl PinMap {
    pub fn validate(&self) -> Result<(), WrapperError> {
        let mut seen = BTreeSet::new();
        for b in self.select_bits.iter().chain([&self.clock_bit]).chain(&self.shared_inputs) {
            if *b > 7 {
                return Err(WrapperError::PinOutOfRange(*b));
            }
            if !seen.insert(*b) {
                return Err(WrapperError::DuplicatePin(*b));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WrapperError {
    #[error("{0} benchmarks exceed the 8 select slots")]
    Capacity(usize),
    #[error("input pin {0} is outside io_in[7:0]")]
    PinOutOfRange(u8),
    #[error("input pin {0} is assigned twice in the pin map")]
    DuplicatePin(u8),
    #[error("benchmark `{benchmark}`: port `{port}` cannot be mapped: {why}")]
    Unmappable { benchmark: String, port: String, why: String },
}

/// How one benchmark input reaches the wrapper pins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputBinding {
    pub port: String,
    pub role: PortRole,
    /// io_in bit per port bit, LSB first.
    pub pins: Vec<u8>,
    /// Active-low reset driven from the active-high reset pin.
    pub inverted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputBinding {
    pub port: String,
    /// Lowest io_out bit carrying this port.
    pub lsb: u32,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub select: u8,
    pub benchmark_id: String,
    pub clocked: bool,
    pub inputs: Vec<InputBinding>,
    pub outputs: Vec<OutputBinding>,
}

impl SlotPlan {
    pub fn output_bits(&self) -> u32 {
        self.outputs.iter().map(|o| o.width).sum()
    }
}

pub fn plan_slots(benchmarks: &[BenchmarkSpec], pinmap: &PinMap) -> Result<Vec<SlotPlan>, WrapperError> {
    if benchmarks.len() > TAPEOUT_SLOTS {
        return Err(WrapperError::Capacity(benchmarks.len()));
    }
    pinmap.validate()?;
    benchmarks.iter().enumerate().map(|(i, b)| plan_slot(i as u8, b, pinmap)).collect()
}

fn plan_slot(select: u8, bench: &BenchmarkSpec, pinmap: &PinMap) -> Result<SlotPlan, WrapperError> {
    let unmappable = |port: &str, why: String| WrapperError::Unmappable {
        benchmark: bench.id.clone(),
        port: port.to_string(),
        why,
    };
    let iface = &bench.interface;
    let clocked = iface.clock().is_some();
    let mut pool: Vec<u8> = pinmap.shared_inputs.to_vec();
    if !clocked {
        pool.push(pinmap.clock_bit);
        pool.sort_unstable();
    }
    let overrides = pinmap.assignments.get(&bench.id);
    let mut used: BTreeSet<u8> = BTreeSet::new();
    if let Some(ov) = overrides {
        for (port, pins) in ov {
            if iface.port(port).map_or(true, |p| p.direction != Direction::Input || p.role == PortRole::Clock) {
                return Err(unmappable(port, "not a non-clock input of this benchmark".to_string()));
            }
            for p in pins {
                if !pool.contains(p) || !used.insert(*p) {
                    return Err(unmappable(port, format!("pin {p} is not a free shared input")));
                }
            }
        }
    }
    let mut free = pool.iter().copied().filter(|p| !used.contains(p));
    let mut inputs = Vec::new();
    for port in iface.ports.iter().filter(|p| p.direction == Direction::Input) {
        if port.role == PortRole::Clock {
            inputs.push(InputBinding { port: port.name.clone(), role: port.role, pins: alloc::vec![pinmap.clock_bit], inverted: false });
            continue;
        }
        let pins = match overrides.and_then(|o| o.get(&port.name)) {
            Some(pins) => {
                if pins.len() != port.width as usize {
                    return Err(unmappable(&port.name, format!("{} pins given for a {}-bit port", pins.len(), port.width)));
                }
                pins.clone()
            }
            None => {
                let pins: Vec<u8> = free.by_ref().take(port.width as usize).collect();
                if pins.len() != port.width as usize {
                    return Err(unmappable(&port.name, "not enough shared input pins".to_string()));
                }
                pins
            }
        };
        inputs.push(InputBinding {
            port: port.name.clone(),
            role: port.role,
            pins,
            inverted: port.role == PortRole::ResetActiveLow,
        });
    }
    let mut outputs = Vec::new();
    let mut lsb = 0;
    for port in iface.ports.iter().filter(|p| p.direction == Direction::Output) {
        outputs.push(OutputBinding { port: port.name.clone(), lsb, width: port.width });
        lsb += port.width;
    }
    if lsb > TAPEOUT_OUTPUT_BITS {
        let last = outputs.last().map(|o| o.port.clone()).unwrap_or_default();
        return Err(unmappable(&last, format!("{lsb} output bits exceed io_out[7:0]")));
    }
    Ok(SlotPlan { select, benchmark_id: bench.id.clone(), clocked, inputs, outputs })
}

/// Fresh identifiers that never equal a benchmark module name or each other.
struct Names {
    taken: BTreeSet<String>,
}

impl Names {
    fn new(reserved: impl IntoIterator<Item = String>) -> Self {
        Names { taken: reserved.into_iter().collect() }
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut cand = base.to_string();
        let mut n = 1;
        while self.taken.contains(&cand) {
            cand = format!("{base}_{n}");
            n += 1;
        }
        self.taken.insert(cand.clone());
        cand
    }
}

/// Identifiers chosen for one generated wrapper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapperNames {
    pub module: String,
    pub io_in: String,
    pub io_out: String,
    pub select: String,
    pub slot_wires: Vec<String>,
    pub instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wrapper {
    pub source: String,
    pub pinout: String,
    pub slots: Vec<SlotPlan>,
    pub names: WrapperNames,
    pub pinmap: PinMap,
    /// Slot routed by each select value (None drives zero).
    pub routing: [Option<usize>; 8],
}

pub const DEFAULT_WRAPPER_NAME: &str = "tt_hdlloop_wrapper";

pub fn generate_wrapper(benchmarks: &[BenchmarkSpec], pinmap: &PinMap) -> Result<Wrapper, WrapperError> {
    let slots = plan_slots(benchmarks, pinmap)?;
    let mut routing = [None; 8];
    if slots.len() == 1 {
        routing = [Some(0); 8];
    } else {
        for (i, r) in routing.iter_mut().enumerate().take(slots.len()) {
            *r = Some(i);
        }
    }
    Ok(render_wrapper(slots, pinmap, routing))
}

/// Regenerates `wrapper` with a different select routing. Used to build
/// deliberately broken wrappers for checking the validator.
pub fn with_routing(wrapper: &Wrapper, routing: [Option<usize>; 8]) -> Wrapper {
    render_wrapper(wrapper.slots.clone(), &wrapper.pinmap, routing)
}

fn bit_list(bus: &str, pins: &[u8]) -> String {
    if pins.len() == 1 {
        return format!("{bus}[{}]", pins[0]);
    }
    let parts: Vec<String> = pins.iter().rev().map(|p| format!("{bus}[{p}]")).collect();
    format!("{{{}}}", parts.join(", "))
}

fn render_wrapper(slots: Vec<SlotPlan>, pinmap: &PinMap, routing: [Option<usize>; 8]) -> Wrapper {
    let mut names = Names::new(slots.iter().map(|s| s.benchmark_id.clone()));
    let module = names.fresh(DEFAULT_WRAPPER_NAME);
    let io_in = names.fresh("io_in");
    let io_out = names.fresh("io_out");
    let select = names.fresh("sel");
    let slot_wires: Vec<String> = slots.iter().map(|s| names.fresh(&format!("slot{}_out", s.select))).collect();
    let instances: Vec<String> = slots.iter().map(|s| names.fresh(&format!("u_slot{}", s.select))).collect();

    let mut v = String::new();
    v.push_str(&format!("module {module} (\n    input  wire [7:0] {io_in},\n    output reg  [7:0] {io_out}\n);\n"));
    v.push_str(&format!("    wire [2:0] {select} = {};\n", bit_list(&io_in, &pinmap.select_bits)));
    for (k, slot) in slots.iter().enumerate() {
        let w = &slot_wires[k];
        v.push_str(&format!("\n    // select {}: {}\n", slot.select, slot.benchmark_id));
        v.push_str(&format!("    wire [7:0] {w};\n"));
        let used = slot.output_bits();
        if used < 8 {
            v.push_str(&format!("    assign {w}[7:{used}] = {}'d0;\n", 8 - used));
        }
        v.push_str(&format!("    {} {} (\n", verilog_ident(&slot.benchmark_id), instances[k]));
        let mut conns = Vec::new();
        for inp in &slot.inputs {
            let src = bit_list(&io_in, &inp.pins);
            let expr = if inp.inverted { format!("~{src}") } else { src };
            conns.push(format!("        .{}({expr})", verilog_ident(&inp.port)));
        }
        for out in &slot.outputs {
            let dst = if out.width == 1 {
                format!("{w}[{}]", out.lsb)
            } else {
                format!("{w}[{}:{}]", out.lsb + out.width - 1, out.lsb)
            };
            conns.push(format!("        .{}({dst})", verilog_ident(&out.port)));
        }
        v.push_str(&conns.join(",\n"));
        v.push_str("\n    );\n");
    }
    v.push_str(&format!("\n    always @(*) begin\n        case ({select})\n"));
    for (sel, r) in routing.iter().enumerate() {
        if let Some(k) = r {
            v.push_str(&format!("            3'd{sel}: {io_out} = {};\n", slot_wires[*k]));
        }
    }
    v.push_str(&format!("            default: {io_out} = 8'd0;\n        endcase\n    end\nendmodule\n"));

    let pinout = render_pinout(&slots, pinmap, &module);
    Wrapper {
        source: v,
        pinout,
        slots,
        names: WrapperNames { module, io_in, io_out, select, slot_wires, instances },
        pinmap: pinmap.clone(),
        routing,
    }
}

fn render_pinout(slots: &[SlotPlan], pinmap: &PinMap, module: &str) -> String {
    let mut out = format!("Pinout for {module}\n\n");
    out.push_str(&format!(
        "io_in[{}], io_in[{}], io_in[{}]: select (LSB first)\nio_in[{}]: clock\nio_in[{}]: shared inputs\nreset pins are active-high at the wrapper\n\n",
        pinmap.select_bits[0],
        pinmap.select_bits[1],
        pinmap.select_bits[2],
        pinmap.clock_bit,
        pinmap.shared_inputs.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")
    ));
    out.push_str("select | benchmark | io_in | io_out\n");
    for s in slots {
        let ins: Vec<String> = s
            .inputs
            .iter()
            .map(|i| {
                let pins: Vec<String> = i.pins.iter().map(|p| p.to_string()).collect();
                let inv = if i.inverted { " (inverted)" } else { "" };
                format!("{}<-[{}]{inv}", i.port, pins.join(","))
            })
            .collect();
        let outs: Vec<String> = s
            .outputs
            .iter()
            .map(|o| {
                if o.width == 1 {
                    format!("{}->[{}]", o.port, o.lsb)
                } else {
                    format!("{}->[{}:{}]", o.port, o.lsb + o.width - 1, o.lsb)
                }
            })
            .collect();
        out.push_str(&format!("{} | {} | {} | {}\n", s.select, s.benchmark_id, ins.join(" "), outs.join(" ")));
    }
    for sel in slots.len()..8 {
        if slots.len() != 1 {
            out.push_str(&format!("{sel} | (unassigned) | - | drives 0\n"));
        }
    }
    out
}

/// Knobs for the differential harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessOptions {
    pub seed: u64,
    pub random_cycles: u32,
    pub reset_cycles: u32,
    pub unassigned_cycles: u32,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions { seed: 0x5eed, random_cycles: 64, reset_cycles: 2, unassigned_cycles: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harness {
    pub module: String,
    pub source: String,
}

/// Builds a self-contained testbench comparing the wrapper against bare
/// instances of each benchmark, select value by select value.
pub fn build_harness(wrapper: &Wrapper, benchmarks: &[BenchmarkSpec], opts: &HarnessOptions) -> Harness {
    let mut names = Names::new(benchmarks.iter().map(|b| b.id.clone()).chain([wrapper.names.module.clone()]));
    let module = names.fresh("wrapper_harness");
    let clk = names.fresh("clk");
    let clk_en = names.fresh("clk_en");
    let pins = names.fresh("pins");
    let io_in = names.fresh("io_in_w");
    let io_out = names.fresh("io_out_w");
    let cycle = names.fresh("cycle");
    let checked = names.fresh("checked");
    let mism = names.fresh("mismatches");
    let cb = wrapper.pinmap.clock_bit;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut h = String::new();
    h.push_str("`timescale 1ns/1ps\n");
    h.push_str(&format!("module {module};\n"));
    h.push_str(&format!("    reg {clk};\n    reg {clk_en};\n    reg [7:0] {pins};\n    wire [7:0] {io_out};\n"));
    h.push_str(&format!("    integer {cycle};\n    integer {checked};\n    integer {mism};\n"));
    let in_bits: Vec<String> = (0..8u8)
        .rev()
        .map(|b| if b == cb { format!("({clk_en} ? {clk} : {pins}[{b}])") } else { format!("{pins}[{b}]") })
        .collect();
    h.push_str(&format!("    wire [7:0] {io_in} = {{{}}};\n", in_bits.join(", ")));
    h.push_str(&format!(
        "    {} dut_wrapper (.{}({io_in}), .{}({io_out}));\n",
        wrapper.names.module, wrapper.names.io_in, wrapper.names.io_out
    ));

    // bare instances with their own input registers
    let mut bare_regs: Vec<BTreeMap<String, String>> = Vec::new();
    let mut expected: Vec<String> = Vec::new();
    for (slot, bench) in wrapper.slots.iter().zip(benchmarks) {
        let mut regs = BTreeMap::new();
        let mut conns = Vec::new();
        for p in &bench.interface.ports {
            let range = if p.width > 1 { format!(" [{}:0]", p.width - 1) } else { String::new() };
            if p.direction == Direction::Input && p.role == PortRole::Clock {
                conns.push(format!(".{}({clk})", verilog_ident(&p.name)));
                continue;
            }
            let net = names.fresh(&format!("s{}_{}", slot.select, p.name));
            let kind = if p.direction == Direction::Input { "reg " } else { "wire" };
            h.push_str(&format!("    {kind}{range} {net};\n"));
            conns.push(format!(".{}({net})", verilog_ident(&p.name)));
            regs.insert(p.name.clone(), net);
        }
        let inst = names.fresh(&format!("bare{}", slot.select));
        h.push_str(&format!("    {} {inst} ({});\n", verilog_ident(&bench.id), conns.join(", ")));
        let exp = names.fresh(&format!("expected{}", slot.select));
        let mut parts: Vec<String> = slot.outputs.iter().rev().map(|o| regs[&o.port].clone()).collect();
        let used = slot.output_bits();
        if used < 8 {
            parts.insert(0, format!("{}'d0", 8 - used));
        }
        h.push_str(&format!("    wire [7:0] {exp} = {{{}}};\n", parts.join(", ")));
        expected.push(exp);
        bare_regs.push(regs);
    }

    h.push_str(&format!("\n    initial {clk} = 1'b0;\n    always #5 {clk} = ~{clk};\n\n    initial begin\n"));
    h.push_str(&format!("        {pins} = 8'd0;\n        {clk_en} = 1'b1;\n"));
    for (regs, bench) in bare_regs.iter().zip(benchmarks) {
        for p in bench.interface.ports.iter().filter(|p| p.direction == Direction::Input && p.role != PortRole::Clock) {
            h.push_str(&format!("        {} = {}'d0;\n", regs[&p.name], p.width));
        }
    }
    for sel in 0..8u8 {
        let routed = wrapper.slots.get(sel as usize).filter(|_| wrapper.slots.len() > 1 || sel == 0);
        h.push_str(&format!("        // select {sel}\n        {cycle} = 0;\n        {checked} = 0;\n        {mism} = 0;\n"));
        let Some(slot) = routed else {
            if wrapper.slots.len() == 1 {
                // a single benchmark owns every select value; exercised through select 0
                continue;
            }
            for _ in 0..opts.unassigned_cycles {
                let value = (rng.next_u32() as u8 & !select_mask(&wrapper.pinmap)) | select_pins(&wrapper.pinmap, sel);
                h.push_str(&format!("        @(negedge {clk});\n        {pins} = 8'd{value};\n        @(negedge {clk});\n"));
                h.push_str(&format!(
                    "        {checked} = {checked} + 1;\n        if ({io_out} !== 8'd0) {mism} = {mism} + 1;\n"
                ));
            }
            h.push_str(&format!(
                "        $display(\"UNASSIGNED sel={sel} checked=%0d nonzero=%0d\", {checked}, {mism});\n"
            ));
            continue;
        };
        let k = sel as usize;
        let bench = &benchmarks[k];
        let regs = &bare_regs[k];
        let exp = &expected[k];
        h.push_str(&format!("        {clk_en} = 1'b{};\n", u8::from(slot.clocked)));
        let mut values: BTreeMap<String, u64> = slot
            .inputs
            .iter()
            .filter(|i| i.role != PortRole::Clock)
            .map(|i| (i.port.clone(), 0))
            .collect();
        let reset = slot.inputs.iter().find(|i| i.role.is_reset()).map(|i| i.port.clone());
        let deasserted = |port: &str| -> u64 {
            match bench.interface.port(port).map(|p| p.role) {
                Some(PortRole::ResetActiveLow) => 1,
                _ => 0,
            }
        };
        let mut program: Vec<(Vec<(String, u64)>, bool)> = Vec::new();
        if let Some(r) = &reset {
            let asserted = 1 - deasserted(r);
            for _ in 0..opts.reset_cycles {
                program.push((alloc::vec![(r.clone(), asserted)], false));
            }
            program.push((alloc::vec![(r.clone(), 1 - asserted)], true));
        }
        for step in &bench.stimulus {
            for c in 0..step.cycles {
                let assigns = if c == 0 { step.assigns.clone() } else { Vec::new() };
                program.push((assigns, true));
            }
        }
        for _ in 0..opts.random_cycles {
            let mut assigns = Vec::new();
            for inp in slot.inputs.iter().filter(|i| i.role != PortRole::Clock && !i.role.is_reset()) {
                let mask = if inp.pins.len() >= 64 { u64::MAX } else { (1u64 << inp.pins.len()) - 1 };
                assigns.push((inp.port.clone(), rng.next_u64() & mask));
            }
            program.push((assigns, true));
        }
        for (assigns, check) in program {
            h.push_str(&format!("        @(negedge {clk});\n"));
            if check {
                h.push_str(&format!(
                    "        {checked} = {checked} + 1;\n        if ({io_out} !== {exp}) begin\n            {mism} = {mism} + 1;\n            $display(\"MISMATCH sel={sel} cycle=%0d expected=%b observed=%b\", {cycle}, {exp}, {io_out});\n        end\n"
                ));
            }
            for (port, value) in assigns {
                values.insert(port, value);
            }
            let pin_value = pins_for(slot, &values, &wrapper.pinmap, sel);
            h.push_str(&format!("        {cycle} = {cycle} + 1;\n        {pins} = 8'd{pin_value};\n"));
            for (port, value) in &values {
                if let Some(reg) = regs.get(port) {
                    h.push_str(&format!("        {reg} = {value};\n"));
                }
            }
        }
        h.push_str(&format!("        @(negedge {clk});\n        {checked} = {checked} + 1;\n"));
        h.push_str(&format!(
            "        if ({io_out} !== {exp}) begin\n            {mism} = {mism} + 1;\n            $display(\"MISMATCH sel={sel} cycle=%0d expected=%b observed=%b\", {cycle}, {exp}, {io_out});\n        end\n"
        ));
        h.push_str(&format!("        $display(\"SELECT sel={sel} checked=%0d mismatches=%0d\", {checked}, {mism});\n"));
        if wrapper.slots.len() == 1 {
            for other in 1..8u8 {
                h.push_str(&format!("        {pins} = ({pins} & 8'd{}) | 8'd{};\n", !select_mask(&wrapper.pinmap), select_pins(&wrapper.pinmap, other)));
                h.push_str(&format!("        @(negedge {clk});\n"));
                h.push_str(&format!(
                    "        if ({io_out} !== {exp}) $display(\"MISMATCH sel={other} cycle=0 expected=%b observed=%b\", {exp}, {io_out});\n"
                ));
                h.push_str(&format!("        $display(\"SELECT sel={other} checked=1 mismatches=%0d\", {io_out} !== {exp});\n"));
            }
        }
    }
    h.push_str("        $display(\"HARNESS DONE\");\n        $finish;\n    end\nendmodule\n");
    Harness { module, source: h }
}

fn select_mask(pinmap: &PinMap) -> u8 {
    pinmap.select_bits.iter().fold(0, |m, b| m | (1 << b))
}

fn select_pins(pinmap: &PinMap, sel: u8) -> u8 {
    pinmap.select_bits.iter().enumerate().fold(0, |m, (i, b)| if sel >> i & 1 == 1 { m | (1 << b) } else { m })
}

fn pins_for(slot: &SlotPlan, values: &BTreeMap<String, u64>, pinmap: &PinMap, sel: u8) -> u8 {
    let mut v = select_pins(pinmap, sel);
    for inp in slot.inputs.iter().filter(|i| i.role != PortRole::Clock) {
        let mut x = values.get(&inp.port).copied().unwrap_or(0);
        if inp.inverted {
            x = !x & 1;
        }
        for (bit, pin) in inp.pins.iter().enumerate() {
            if x >> bit & 1 == 1 {
                v |= 1 << pin;
            }
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub select: u8,
    pub cycle: u64,
    pub expected: String,
    pub observed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum SelectStatus {
    Matched { checked: u64 },
    Mismatched { checked: u64, mismatches: u64 },
    UnassignedQuiescent { checked: u64 },
    UnassignedActive { checked: u64, nonzero: u64 },
    NotReported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub selects: Vec<SelectStatus>,
    pub mismatches: Vec<Mismatch>,
    pub complete: bool,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.complete
            && self
                .selects
                .iter()
                .all(|s| matches!(s, SelectStatus::Matched { .. } | SelectStatus::UnassignedQuiescent { .. }))
    }

    pub fn failing_selects(&self) -> Vec<u8> {
        self.selects
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s, SelectStatus::Matched { .. } | SelectStatus::UnassignedQuiescent { .. }))
            .map(|(i, _)| i as u8)
            .collect()
    }
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|w| w.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Reads the harness output back into a report.
pub fn parse_harness_output(output: &str) -> ValidationReport {
    let mut selects = alloc::vec![SelectStatus::NotReported; 8];
    let mut mismatches = Vec::new();
    let mut complete = false;
    for line in output.lines().map(str::trim) {
        let num = |k: &str| field(line, k).and_then(|v| v.parse::<u64>().ok());
        if line.starts_with("MISMATCH") {
            if let (Some(sel), Some(cycle)) = (num("sel"), num("cycle")) {
                mismatches.push(Mismatch {
                    select: sel as u8,
                    cycle,
                    expected: field(line, "expected").unwrap_or_default().to_string(),
                    observed: field(line, "observed").unwrap_or_default().to_string(),
                });
            }
        } else if line.starts_with("SELECT") {
            if let (Some(sel), Some(checked), Some(m)) = (num("sel"), num("checked"), num("mismatches")) {
                if let Some(slot) = selects.get_mut(sel as usize) {
                    *slot = if m == 0 { SelectStatus::Matched { checked } } else { SelectStatus::Mismatched { checked, mismatches: m } };
                }
            }
        } else if line.starts_with("UNASSIGNED") {
            if let (Some(sel), Some(checked), Some(nz)) = (num("sel"), num("checked"), num("nonzero")) {
                if let Some(slot) = selects.get_mut(sel as usize) {
                    *slot = if nz == 0 {
                        SelectStatus::UnassignedQuiescent { checked }
                    } else {
                        SelectStatus::UnassignedActive { checked, nonzero: nz }
                    };
                }
            }
        } else if line == "HARNESS DONE" {
            complete = true;
        }
    }
    ValidationReport { selects, mismatches, complete }
}
