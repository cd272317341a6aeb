#![allow(dead_code)]

use std::path::{Path, PathBuf};

use oppex::library::RuntimeConfig;
use oppex::pipeline::{args_from_json, compile, CompileOptions, Compiled, SourceKind};
use oppex::runtime::value::Value;

pub fn programs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/programs")
}

pub fn source(file: &str) -> String {
    std::fs::read_to_string(programs_dir().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn compile_file(file: &str, entry: Option<&str>) -> Compiled {
    compile_with(file, entry, true)
}

pub fn compile_with(file: &str, entry: Option<&str>, promotion: bool) -> Compiled {
    let opts = CompileOptions { entry: entry.map(String::from), promotion, overrides: Vec::new() };
    compile(&source(file), SourceKind::of_path(Path::new(file)), &opts).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn compile_src(src: &str, entry: Option<&str>) -> Compiled {
    let opts = CompileOptions { entry: entry.map(String::from), ..CompileOptions::default() };
    compile(src, SourceKind::Surface, &opts).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn corpus_config() -> RuntimeConfig {
    RuntimeConfig::from_json(&source("corpus_config.json")).unwrap()
}

/// A config with every listed external served by a mock of fixed latency.
pub fn mock_config(names: &[&str], latency_ms: f64) -> RuntimeConfig {
    let mut ext = serde_json::Map::new();
    for n in names {
        ext.insert(
            n.to_string(),
            serde_json::json!({"backend": "mock", "latency_ms": latency_ms, "reply": {"rule": "hash_mod", "mod": 100}}),
        );
    }
    RuntimeConfig::from_json(&serde_json::json!({ "externals": ext }).to_string()).unwrap()
}

pub struct CorpusEntry {
    pub file: String,
    pub entry: Option<String>,
    pub args_json: String,
}

impl CorpusEntry {
    pub fn label(&self) -> String {
        format!("{} {}", self.file, self.args_json)
    }

    pub fn compiled(&self) -> Compiled {
        compile_file(&self.file, self.entry.as_deref())
    }

    pub fn args(&self) -> Vec<Value> {
        args_from_json(&self.args_json).unwrap()
    }
}

pub fn corpus() -> Vec<CorpusEntry> {
    let m: serde_json::Value = serde_json::from_str(&source("corpus.json")).unwrap();
    m.as_array()
        .unwrap()
        .iter()
        .map(|e| CorpusEntry {
            file: e["file"].as_str().unwrap().to_string(),
            entry: e["entry"].as_str().map(String::from),
            args_json: e["args"].to_string(),
        })
        .collect()
}

/// Each call moves Queued → Dispatched → Resolved, once each, with non-decreasing timestamps.
pub fn assert_well_formed(trace: &oppex::trace::Trace) {
    use oppex::trace::EventPhase::*;
    use std::collections::HashMap;
    let mut state: HashMap<u64, (oppex::trace::EventPhase, f64)> = HashMap::new();
    for e in &trace.events {
        match (state.get(&e.call_id), e.phase) {
            (None, Queued) => {}
            (Some((Queued, t)), Dispatched) | (Some((Dispatched, t)), Resolved) => {
                assert!(e.t_ms >= *t, "time went backwards for call {}", e.call_id)
            }
            (prev, p) => panic!("call {} went from {prev:?} to {p:?}", e.call_id),
        }
        state.insert(e.call_id, (e.phase, e.t_ms));
    }
}
