//! Opportunistic evaluator.

mod eval;
mod lower;
pub mod value;

use serde::Serialize;

use crate::bezoar::ir::ExternDecl;
use crate::control::{AnnotationPolicy, AnnotationTable};
use crate::error::{CompileError, RuntimeError};
use crate::library::{self, RuntimeConfig};
use crate::opal::OpalProgram;
use crate::trace::Trace;
use value::Value;

pub(crate) use lower::literal_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Dispatch as soon as data and annotation allow.
    #[default]
    Opportunistic,
    /// Every call waits for all earlier calls: the sequential reference order.
    Oracle,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    /// Seeds mock latency jitter. Without a seed latencies are exact.
    pub seed: Option<u64>,
    /// Also write `print` output to the process stdout.
    pub echo_stdout: bool,
    pub max_loop_iterations: u64,
    /// Most loop iterations of one `for` instantiated ahead of the oldest unfinished one; unbounded when absent.
    pub fold_window: Option<usize>,
}

pub const DEFAULT_MAX_LOOP_ITERATIONS: u64 = 1_000_000;

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Opportunistic,
            seed: None,
            echo_stdout: false,
            max_loop_iterations: DEFAULT_MAX_LOOP_ITERATIONS,
            fold_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timing {
    pub wall_ms: f64,
    /// Wall time minus time spent blocked on outstanding externals.
    pub interpreter_ms: f64,
    pub wait_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub queued: usize,
    pub dispatched: usize,
    pub resolved: usize,
    pub signals_created: usize,
    pub signals_fulfilled: usize,
    pub double_fulfills: usize,
    pub frames: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub value: Result<Value, RuntimeError>,
    pub trace: Trace,
    /// Lines written by `print`, in order.
    pub output: Vec<String>,
    pub timing: Timing,
    pub stats: RunStats,
}

impl RunOutcome {
    /// An outcome for a run that stopped before its first event.
    pub fn failed(e: RuntimeError) -> Self {
        RunOutcome { value: Err(e), trace: Trace::default(), output: Vec::new(), timing: Timing::default(), stats: RunStats::default() }
    }
}

/// The library annotation table extended with the program's own externals.
pub fn program_annotations(externals: &[ExternDecl]) -> AnnotationTable {
    let mut t = library::annotation_table();
    for e in externals {
        t.insert(e.name.clone(), AnnotationPolicy::Static(e.annotation));
    }
    t
}

/// Runs the entry function of `p` on `args`.
///
/// Static problems (unknown entry, an external with no backend) are reported
/// before anything runs; the outcome carries any runtime fault.
pub fn evaluate(p: &OpalProgram, args: Vec<Value>, config: &RuntimeConfig, opts: &RunOptions) -> Result<RunOutcome, CompileError> {
    let prog = lower::lower(p)?;
    let entry = *prog.top.get(&p.entry).ok_or_else(|| CompileError::UnknownEntry(p.entry.clone()))?;
    let table = program_annotations(&p.externals);
    let machine = eval::Machine::new(&prog, table, config, opts);
    if let Some(missing) = prog.ext_names.iter().find(|n| config.backend_for(n).is_none()) {
        return Ok(RunOutcome::failed(RuntimeError::UnknownExternal(missing.to_string())));
    }
    Ok(machine.run(entry, args))
}
