//! Suite documents: one `[[benchmark]]` table per benchmark, golden Verilog
//! stored next to the document.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hdlloop_core::bench::{validate_suite, BenchmarkSpec, InterfaceSpec, PortRole, PortSpec, SpecError, StimulusStep};
use hdlloop_core::hdl::Direction;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SUITE_TOML: &str = include_str!("../assets/suite/suite.toml");

const EMBEDDED_ASSETS: &[(&str, &str)] = &[
    ("shift_register.v", include_str!("../assets/suite/shift_register.v")),
    ("shift_register_tb.v", include_str!("../assets/suite/shift_register_tb.v")),
    ("seq_gen.v", include_str!("../assets/suite/seq_gen.v")),
    ("seq_gen_tb.v", include_str!("../assets/suite/seq_gen_tb.v")),
    ("seq_det.v", include_str!("../assets/suite/seq_det.v")),
    ("seq_det_tb.v", include_str!("../assets/suite/seq_det_tb.v")),
    ("abro.v", include_str!("../assets/suite/abro.v")),
    ("abro_tb.v", include_str!("../assets/suite/abro_tb.v")),
    ("bin2bcd.v", include_str!("../assets/suite/bin2bcd.v")),
    ("bin2bcd_tb.v", include_str!("../assets/suite/bin2bcd_tb.v")),
    ("lfsr.v", include_str!("../assets/suite/lfsr.v")),
    ("lfsr_tb.v", include_str!("../assets/suite/lfsr_tb.v")),
    ("traffic_light.v", include_str!("../assets/suite/traffic_light.v")),
    ("traffic_light_tb.v", include_str!("../assets/suite/traffic_light_tb.v")),
    ("dice_roller.v", include_str!("../assets/suite/dice_roller.v")),
    ("dice_roller_tb.v", include_str!("../assets/suite/dice_roller_tb.v")),
];

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("suite document, line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Spec(#[from] SpecError),
    #[error("benchmark `{benchmark}`: golden asset `{asset}`: {message}")]
    Asset { benchmark: String, asset: String, message: String },
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl SuiteError {
    pub fn is_constraint(&self) -> bool {
        matches!(self, SuiteError::Spec(e) if e.is_constraint())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteDoc {
    #[serde(default)]
    benchmark: Vec<BenchDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchDoc {
    id: String,
    title: String,
    subject: String,
    #[serde(default)]
    tapeout_constrained: bool,
    golden_design: String,
    golden_testbench: String,
    #[serde(default)]
    description_bullets: Vec<String>,
    #[serde(default)]
    extra_constraints: Vec<String>,
    #[serde(default)]
    stimulus: Vec<String>,
    ports: Vec<PortDoc>,
    #[serde(default)]
    aliases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    parameters: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortDoc {
    name: String,
    direction: Direction,
    width: u32,
    role: PortRole,
    label: String,
}

/// A loaded suite with its golden sources in memory.
#[derive(Debug, Clone)]
pub struct Suite {
    pub benchmarks: Vec<BenchmarkSpec>,
    assets: BTreeMap<String, String>,
}

impl Suite {
    pub fn builtin() -> Suite {
        let assets = EMBEDDED_ASSETS.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
        parse_suite(DEFAULT_SUITE_TOML, assets).expect("built-in suite is valid")
    }

    pub fn load(path: &Path) -> Result<Suite, SuiteError> {
        let text = fs::read_to_string(path).map_err(|source| SuiteError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let doc = parse_doc(&text)?;
        let mut assets = BTreeMap::new();
        for b in &doc.benchmark {
            for asset in [&b.golden_design, &b.golden_testbench] {
                let p = base.join(asset);
                let t = fs::read_to_string(&p).map_err(|e| SuiteError::Asset {
                    benchmark: b.id.clone(),
                    asset: asset.clone(),
                    message: e.to_string(),
                })?;
                assets.insert(asset.clone(), t);
            }
        }
        build(doc, assets)
    }

    pub fn get(&self, id: &str) -> Result<&BenchmarkSpec, SuiteError> {
        self.benchmarks.iter().find(|b| b.id == id).ok_or_else(|| SuiteError::UnknownBenchmark(id.to_string()))
    }

    pub fn golden_design(&self, spec: &BenchmarkSpec) -> &str {
        &self.assets[&spec.golden_design]
    }

    pub fn golden_testbench(&self, spec: &BenchmarkSpec) -> &str {
        &self.assets[&spec.golden_testbench]
    }

    /// Restricts the suite to the named benchmarks, keeping their order as given.
    pub fn subset(&self, ids: &[String]) -> Result<Suite, SuiteError> {
        let benchmarks = ids.iter().map(|id| self.get(id).cloned()).collect::<Result<Vec<_>, _>>()?;
        Ok(Suite { benchmarks, assets: self.assets.clone() })
    }

    /// Writes the suite document and golden files into `dir`.
    pub fn export(&self, dir: &Path) -> Result<(), SuiteError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SuiteError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let doc = SuiteDoc { benchmark: self.benchmarks.iter().map(to_doc).collect() };
        let text = toml::to_string_pretty(&doc).expect("suite serializes");
        let p = dir.join("suite.toml");
        fs::write(&p, text).map_err(io(&p))?;
        for b in &self.benchmarks {
            for asset in [&b.golden_design, &b.golden_testbench] {
                let p = dir.join(asset);
                fs::write(&p, &self.assets[asset]).map_err(io(&p))?;
            }
        }
        Ok(())
    }
}

fn to_doc(b: &BenchmarkSpec) -> BenchDoc {
    BenchDoc {
        id: b.id.clone(),
        title: b.title.clone(),
        subject: b.subject.clone(),
        tapeout_constrained: b.interface.tapeout_constrained,
        golden_design: b.golden_design.clone(),
        golden_testbench: b.golden_testbench.clone(),
        description_bullets: b.description_bullets.clone(),
        extra_constraints: b.extra_constraints.clone(),
        stimulus: b.stimulus.iter().map(render_step).collect(),
        ports: b
            .interface
            .ports
            .iter()
            .map(|p| PortDoc { name: p.name.clone(), direction: p.direction, width: p.width, role: p.role, label: p.label.clone() })
            .collect(),
        aliases: b.interface.name_aliases.clone(),
        parameters: b.parameters.clone(),
    }
}

fn render_step(s: &StimulusStep) -> String {
    let mut words: Vec<String> = s.assigns.iter().map(|(n, v)| format!("{n}={v}")).collect();
    if s.cycles != 1 || words.is_empty() {
        words.push(format!("*{}", s.cycles));
    }
    words.join(" ")
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_doc(text: &str) -> Result<SuiteDoc, SuiteError> {
    toml::from_str(text).map_err(|e| SuiteError::Config {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })
}

/// Parses a suite document whose golden sources are supplied by name.
pub fn parse_suite(text: &str, assets: BTreeMap<String, String>) -> Result<Suite, SuiteError> {
    build(parse_doc(text)?, assets)
}

fn build(doc: SuiteDoc, assets: BTreeMap<String, String>) -> Result<Suite, SuiteError> {
    let mut benchmarks = Vec::new();
    for b in doc.benchmark {
        let stimulus = b.stimulus.iter().map(|s| StimulusStep::parse(s)).collect::<Result<Vec<_>, _>>()?;
        for asset in [&b.golden_design, &b.golden_testbench] {
            if !assets.contains_key(asset) {
                return Err(SuiteError::Asset { benchmark: b.id.clone(), asset: asset.clone(), message: "not found".into() });
            }
        }
        benchmarks.push(BenchmarkSpec {
            id: b.id,
            title: b.title,
            subject: b.subject,
            interface: InterfaceSpec {
                ports: b
                    .ports
                    .into_iter()
                    .map(|p| PortSpec { name: p.name, direction: p.direction, width: p.width, role: p.role, label: p.label })
                    .collect(),
                name_aliases: b.aliases,
                tapeout_constrained: b.tapeout_constrained,
            },
            description_bullets: b.description_bullets,
            extra_constraints: b.extra_constraints,
            golden_design: b.golden_design,
            golden_testbench: b.golden_testbench,
            parameters: b.parameters,
            stimulus,
        });
    }
    validate_suite(&benchmarks)?;
    Ok(Suite { benchmarks, assets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_eight_in_order() {
        let s = Suite::builtin();
        let ids: Vec<_> = s.benchmarks.iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, ["shift_register", "seq_gen", "seq_det", "abro", "bin2bcd", "lfsr", "traffic_light", "dice_roller"]);
        assert!(s.golden_design(&s.benchmarks[0]).contains("module shift_register"));
    }

    #[test]
    fn empty_document_is_empty_suite() {
        assert!(parse_suite("", BTreeMap::new()).unwrap().benchmarks.is_empty());
    }

    #[test]
    fn config_error_names_line() {
        let err = parse_suite("[[benchmark]]\nid = \"x\"\ntitle = 3\n", BTreeMap::new()).unwrap_err();
        match err {
            SuiteError::Config { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let s = Suite::builtin();
        s.export(dir.path()).unwrap();
        let back = Suite::load(&dir.path().join("suite.toml")).unwrap();
        assert_eq!(back.benchmarks, s.benchmarks);
    }
}
