#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hdlloop::toolchain::{select_tools, ToolConfig, ToolMode, ToolRunner};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn logs(group: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(fixtures().join("logs").join(group))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
        .collect();
    v.sort();
    v
}

/// Simulator tools found through the usual discovery, if any.
pub fn live_tools() -> Option<Arc<dyn ToolRunner>> {
    select_tools(ToolMode::Live, &ToolConfig::default(), Vec::new()).ok()
}
