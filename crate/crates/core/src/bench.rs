//! Benchmark descriptions: ports, prompt bullets, parameters and the stimulus
//! program used when checking a wrapped instance against a bare one.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hdl::Direction;

/// Input/output budget of one tapeout slot: 5 input bits (clock and reset
/// included) and 8 output bits.
pub const TAPEOUT_INPUT_BITS: u32 = 5;
pub const TAPEOUT_OUTPUT_BITS: u32 = 8;
/// Benchmarks addressable by the 3-bit select field.
pub const TAPEOUT_SLOTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortRole {
    Clock,
    ResetActiveLow,
    ResetActiveHigh,
    Data,
    Enable,
    Select,
    Plain,
}

impl PortRole {
    pub fn is_reset(self) -> bool {
        matches!(self, PortRole::ResetActiveLow | PortRole::ResetActiveHigh)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
    pub role: PortRole,
    /// Prose shown for this port in the design prompt, e.g. "Data (1 bit)".
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub ports: Vec<PortSpec>,
    /// Canonical port name to the extra names accepted for it.
    #[serde(default)]
    pub name_aliases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub tapeout_constrained: bool,
}

/// Built-in equivalences applied to every interface, as normalized names.
const BUILTIN_ALIASES: &[(&str, &str)] = &[("clk", "clock"), ("rstn", "resetn")];

/// Case-folds and strips underscores.
pub fn normalize_name(name: &str) -> String {
    name.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect()
}

impl InterfaceSpec {
    pub fn port(&self, name: &str) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn input_bits(&self) -> u32 {
        self.bits(Direction::Input)
    }

    pub fn output_bits(&self) -> u32 {
        self.bits(Direction::Output)
    }

    fn bits(&self, dir: Direction) -> u32 {
        self.ports.iter().filter(|p| p.direction == dir).map(|p| p.width).sum()
    }

    pub fn clock(&self) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.role == PortRole::Clock)
    }

    pub fn reset(&self) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.role.is_reset())
    }

    /// Every normalized name that may stand for the canonical port `name`.
    pub fn accepted_names(&self, name: &str) -> Vec<String> {
        let mut out = alloc::vec![normalize_name(name)];
        if let Some(extra) = self.name_aliases.get(name) {
            out.extend(extra.iter().map(|a| normalize_name(a)));
        }
        let snapshot = out.clone();
        for n in &snapshot {
            for (a, b) in BUILTIN_ALIASES {
                if n == a {
                    out.push(b.to_string());
                } else if n == b {
                    out.push(a.to_string());
                }
            }
        }
        let mut dedup: Vec<String> = Vec::new();
        for n in out {
            if !dedup.contains(&n) {
                dedup.push(n);
            }
        }
        dedup
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let mut seen: Vec<String> = Vec::new();
        for p in &self.ports {
            if p.width == 0 {
                return Err(SpecError::ZeroWidth(p.name.clone()));
            }
            if p.direction == Direction::Inout {
                return Err(SpecError::Inout(p.name.clone()));
            }
            let n = normalize_name(&p.name);
            if seen.contains(&n) {
                return Err(SpecError::DuplicatePort(p.name.clone()));
            }
            seen.push(n);
            let input_only = matches!(p.role, PortRole::Clock | PortRole::ResetActiveLow | PortRole::ResetActiveHigh);
            if input_only && (p.direction != Direction::Input || p.width != 1) {
                return Err(SpecError::RoleShape(p.name.clone()));
            }
        }
        if self.ports.iter().filter(|p| p.role == PortRole::Clock).count() > 1 {
            return Err(SpecError::MultipleClocks);
        }
        if self.ports.iter().filter(|p| p.role.is_reset()).count() > 1 {
            return Err(SpecError::MultipleResets);
        }
        if self.tapeout_constrained {
            let (i, o) = (self.input_bits(), self.output_bits());
            if i > TAPEOUT_INPUT_BITS {
                return Err(SpecError::TooManyInputBits(i));
            }
            if o > TAPEOUT_OUTPUT_BITS {
                return Err(SpecError::TooManyOutputBits(o));
            }
        }
        Ok(())
    }
}

/// One line of a stimulus program: assignments held for `cycles` clock cycles.
/// Unassigned inputs keep their previous value (zero initially).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusStep {
    pub assigns: Vec<(String, u64)>,
    pub cycles: u32,
}

impl StimulusStep {
    /// Parses `name=value ... [*N]`. Values accept decimal, `0x`, `0b`.
    pub fn parse(line: &str) -> Result<Self, SpecError> {
        let mut assigns = Vec::new();
        let mut cycles = 1;
        for word in line.split_whitespace() {
            if let Some(n) = word.strip_prefix('*') {
                cycles = n.parse().map_err(|_| SpecError::Stimulus(line.to_string()))?;
                continue;
            }
            let (name, value) = word.split_once('=').ok_or_else(|| SpecError::Stimulus(line.to_string()))?;
            let value = parse_u64(value).ok_or_else(|| SpecError::Stimulus(line.to_string()))?;
            assigns.push((name.to_string(), value));
        }
        if cycles == 0 {
            return Err(SpecError::Stimulus(line.to_string()));
        }
        Ok(StimulusStep { assigns, cycles })
    }
}

fn parse_u64(s: &str) -> Option<u64> {
    let s = s.replace('_', "");
    if let Some(h) = s.strip_prefix("0x") {
        u64::from_str_radix(h, 16).ok()
    } else if let Some(b) = s.strip_prefix("0b") {
        u64::from_str_radix(b, 2).ok()
    } else {
        s.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    /// Short identifier, also the module name the golden testbench instantiates.
    pub id: String,
    /// Display name used in reports.
    pub title: String,
    /// Noun phrase completing "a Verilog model for ...".
    pub subject: String,
    pub interface: InterfaceSpec,
    #[serde(default)]
    pub description_bullets: Vec<String>,
    #[serde(default)]
    pub extra_constraints: Vec<String>,
    pub golden_design: String,
    pub golden_testbench: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    #[serde(default)]
    pub stimulus: Vec<StimulusStep>,
}

impl BenchmarkSpec {
    /// Description bullets with `{name}` placeholders filled from parameters.
    pub fn rendered_bullets(&self) -> Result<Vec<String>, SpecError> {
        self.description_bullets.iter().map(|b| substitute(b, &self.parameters)).collect()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(SpecError::BadId(self.id.clone()));
        }
        self.interface.validate()?;
        self.rendered_bullets()?;
        for step in &self.stimulus {
            for (name, value) in &step.assigns {
                let port = self
                    .interface
                    .port(name)
                    .filter(|p| p.direction == Direction::Input && p.role != PortRole::Clock)
                    .ok_or_else(|| SpecError::Stimulus(format!("unknown input `{name}`")))?;
                if port.width < 64 && *value >> port.width != 0 {
                    return Err(SpecError::Stimulus(format!("value {value} too wide for `{name}`")));
                }
            }
        }
        Ok(())
    }
}

fn substitute(text: &str, params: &BTreeMap<String, String>) -> Result<String, SpecError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            return Ok(out);
        };
        let key = &after[..close];
        let value = params.get(key).ok_or_else(|| SpecError::MissingParameter(key.to_string()))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Checks a whole suite: each benchmark valid, ids unique, and at most
/// [`TAPEOUT_SLOTS`] tapeout-constrained benchmarks.
pub fn validate_suite(suite: &[BenchmarkSpec]) -> Result<(), SpecError> {
    let mut ids: Vec<&str> = Vec::new();
    for b in suite {
        b.validate().map_err(|e| SpecError::InBenchmark { id: b.id.clone(), source: alloc::boxed::Box::new(e) })?;
        if ids.contains(&b.id.as_str()) {
            return Err(SpecError::DuplicateBenchmark(b.id.clone()));
        }
        ids.push(&b.id);
    }
    let constrained = suite.iter().filter(|b| b.interface.tapeout_constrained).count();
    if constrained > TAPEOUT_SLOTS {
        return Err(SpecError::TooManyTapeoutBenchmarks(constrained));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("port `{0}` has zero width")]
    ZeroWidth(String),
    #[error("port `{0}` is inout, only input and output are supported")]
    Inout(String),
    #[error("duplicate port `{0}` after name normalization")]
    DuplicatePort(String),
    #[error("port `{0}`: clock and reset ports must be 1-bit inputs")]
    RoleShape(String),
    #[error("more than one clock port")]
    MultipleClocks,
    #[error("more than one reset port")]
    MultipleResets,
    #[error("{0} input bits exceed the tapeout budget of 5")]
    TooManyInputBits(u32),
    #[error("{0} output bits exceed the tapeout budget of 8")]
    TooManyOutputBits(u32),
    #[error("placeholder `{{{0}}}` has no parameter")]
    MissingParameter(String),
    #[error("invalid benchmark id `{0}`")]
    BadId(String),
    #[error("duplicate benchmark `{0}`")]
    DuplicateBenchmark(String),
    #[error("{0} tapeout-constrained benchmarks exceed the 8 select slots")]
    TooManyTapeoutBenchmarks(usize),
    #[error("bad stimulus: {0}")]
    Stimulus(String),
    #[error("benchmark `{id}`: {source}")]
    InBenchmark { id: String, source: alloc::boxed::Box<SpecError> },
}

impl SpecError {
    /// True for violations of the tapeout budgets, as opposed to malformed specs.
    pub fn is_constraint(&self) -> bool {
        match self {
            SpecError::TooManyInputBits(_) | SpecError::TooManyOutputBits(_) | SpecError::TooManyTapeoutBenchmarks(_) => true,
            SpecError::InBenchmark { source, .. } => source.is_constraint(),
            _ => false,
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn shift_register_is_valid() {
        let s = shift_register();
        s.validate().unwrap();
        assert_eq!(s.interface.input_bits(), 4);
        assert_eq!(s.interface.output_bits(), 8);
    }

    #[test]
    fn six_input_bits_is_a_constraint_error() {
        let mut s = shift_register();
        s.interface.ports[2].width = 3;
        let err = validate_suite(&[s]).unwrap_err();
        assert!(err.is_constraint(), "{err}");
    }

    #[test]
    fn nine_constrained_benchmarks_rejected() {
        let suite: Vec<_> = (0..9)
            .map(|i| {
                let mut s = shift_register();
                s.id = format!("b{i}");
                s
            })
            .collect();
        assert_eq!(validate_suite(&suite), Err(SpecError::TooManyTapeoutBenchmarks(9)));
        assert!(validate_suite(&suite[..8]).is_ok());
        assert!(validate_suite(&[]).is_ok());
    }

    #[test]
    fn normalized_duplicates_rejected() {
        let mut s = shift_register();
        s.interface.ports[3].name = "Data_In".to_string();
        assert!(matches!(s.interface.validate(), Err(SpecError::DuplicatePort(_))));
    }

    #[test]
    fn aliases() {
        let s = shift_register();
        assert_eq!(s.interface.accepted_names("clk"), ["clk", "clock"]);
        assert!(s.interface.accepted_names("reset_n").contains(&"rstn".to_string()));
        assert!(s.interface.accepted_names("reset_n").contains(&"rst".to_string()));
        assert_eq!(normalize_name("Shift_Enable"), "shiftenable");
    }

    #[test]
    fn bullets_substitute_parameters() {
        let mut s = shift_register();
        s.description_bullets.push("Seed is {seed}, taps {taps}".to_string());
        assert_eq!(s.validate(), Err(SpecError::MissingParameter("seed".to_string())));
        s.parameters.insert("seed".to_string(), "8'b10001010".to_string());
        s.parameters.insert("taps".to_string(), "8,6,5,4".to_string());
        assert_eq!(s.rendered_bullets().unwrap(), ["Seed is 8'b10001010, taps 8,6,5,4"]);
    }

    #[test]
    fn stimulus_parsing() {
        let st = StimulusStep::parse("a=1 b=0x1f c=0b10 *3").unwrap();
        assert_eq!(st.assigns, [("a".to_string(), 1), ("b".to_string(), 31), ("c".to_string(), 2)]);
        assert_eq!(st.cycles, 3);
        assert!(StimulusStep::parse("a").is_err());
        assert!(StimulusStep::parse("a=1 *0").is_err());
        let mut s = shift_register();
        s.stimulus.push(StimulusStep::parse("data_in=2").unwrap());
        assert!(matches!(s.validate(), Err(SpecError::Stimulus(_))));
    }
}
