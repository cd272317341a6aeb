//! End-to-end entry points: compile a source file, run it, check it against the oracle.

use std::path::Path;

use serde::Serialize;

use crate::bezoar::{self, Program};
use crate::error::{CompileError, RuntimeError, TraceError};
use crate::frontend::{self, ExprKind, Literal, StmtKind, SurfaceModule, TargetKind};
use crate::library::RuntimeConfig;
use crate::mutation_opt;
use crate::opal::{self, OpalProgram};
use crate::runtime::value::Value;
use crate::runtime::{self, Mode, RunOptions, RunOutcome};
use crate::trace::{self, TimelineEntry, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Python-like surface syntax.
    Surface,
    /// Bezoar text.
    Bezoar,
}

impl SourceKind {
    /// `.bz` files hold Bezoar text; anything else is surface syntax.
    pub fn of_path(path: &Path) -> SourceKind {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bz") => SourceKind::Bezoar,
            _ => SourceKind::Surface,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub entry: Option<String>,
    /// Run the variable promotion passes.
    pub promotion: bool,
    /// Module-level integer constants to override, by name.
    pub overrides: Vec<(String, i64)>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { entry: None, promotion: true, overrides: Vec::new() }
    }
}

/// Every stage of one compilation.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub surface: Option<SurfaceModule>,
    pub bezoar: Program,
    pub optimized: Program,
    pub opal: OpalProgram,
    /// Name of the function the run starts in, as written in the source.
    pub entry: String,
}

pub fn compile(source: &str, kind: SourceKind, opts: &CompileOptions) -> Result<Compiled, CompileError> {
    let (surface, bezoar) = match kind {
        SourceKind::Surface => {
            let mut m = frontend::parse_module(source)?;
            for (name, v) in &opts.overrides {
                override_constant(&mut m, name, *v)?;
            }
            let b = bezoar::lower(&m, opts.entry.as_deref())?;
            (Some(m), b)
        }
        SourceKind::Bezoar => {
            if !opts.overrides.is_empty() {
                return Err(CompileError::BadOverride("overrides need surface input".into()));
            }
            let mut b = bezoar::text::parse_program(source)?;
            if let Some(e) = &opts.entry {
                if !b.functions.iter().any(|f| &f.name == e) {
                    return Err(CompileError::UnknownEntry(e.clone()));
                }
                b.entry = e.clone();
            }
            (None, b)
        }
    };
    let optimized = if opts.promotion { mutation_opt::optimize(&bezoar) } else { mutation_opt::fold_known_callees(&bezoar) };
    let opal = opal::compile_to_opal(&optimized)?;
    let entry = opts.entry.clone().unwrap_or_else(|| bezoar.entry.clone());
    Ok(Compiled { surface, bezoar, optimized, opal, entry })
}

/// Replaces the value of a module-level `name = <int>` assignment.
pub fn override_constant(m: &mut SurfaceModule, name: &str, value: i64) -> Result<(), CompileError> {
    let mut found = false;
    for s in &mut m.module_level_statements {
        if let StmtKind::Assign { target, value: e } = &mut s.kind {
            if matches!(&target.kind, TargetKind::Name(n) if n.id == name) {
                if !matches!(e.kind, ExprKind::Lit(Literal::Int(_))) {
                    return Err(CompileError::BadOverride(format!("`{name}` is not an integer constant")));
                }
                e.kind = ExprKind::Lit(Literal::Int(value));
                found = true;
            }
        }
    }
    if found {
        Ok(())
    } else {
        Err(CompileError::BadOverride(format!("no module-level constant `{name}`")))
    }
}

/// Converts entry arguments given as a JSON array of literals.
pub fn args_from_json(text: &str) -> Result<Vec<Value>, String> {
    let j: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("invalid arguments JSON: {e}"))?;
    let items = j.as_array().ok_or("entry arguments must be a JSON array")?;
    items.iter().enumerate().map(|(k, v)| crate::library::value_from_json(v, u64::MAX - k as u64)).collect()
}

pub fn run(c: &Compiled, args: Vec<Value>, config: &RuntimeConfig, opts: &RunOptions) -> Result<RunOutcome, CompileError> {
    if let Some(f) = c.optimized.functions.iter().find(|f| f.name == c.optimized.entry) {
        if f.params.len() != args.len() {
            let e = &c.entry;
            return Ok(RunOutcome::failed(RuntimeError::fault(
                e.as_str(),
                format!("TypeError: {e}() takes {} positional arguments but {} were given", f.params.len(), args.len()),
            )));
        }
    }
    runtime::evaluate(&c.opal, args, config, opts)
}

/// Outcome of one parallel run compared against the oracle.
#[derive(Debug)]
pub struct CheckRun {
    pub seed: u64,
    pub value_matches: bool,
    pub verdict: Result<Verdict, TraceError>,
    pub error: Option<RuntimeError>,
    pub rendering: Option<String>,
}

impl CheckRun {
    pub fn passed(&self) -> bool {
        self.value_matches && matches!(self.verdict, Ok(Verdict::Equivalent))
    }
}

#[derive(Debug)]
pub struct CheckReport {
    pub oracle: RunOutcome,
    pub oracle_rendering: Result<String, RuntimeError>,
    pub runs: Vec<CheckRun>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(CheckRun::passed)
    }
}

fn rendering(v: &Result<Value, RuntimeError>) -> Result<String, RuntimeError> {
    v.as_ref().map(|v| v.py_repr()).map_err(Clone::clone)
}

/// Runs the oracle once, then the opportunistic runtime once per seed.
///
/// A run passes when it ends the same way as the oracle (same value
/// rendering, or same fault) and its trace is equivalent to the oracle's.
pub fn check(
    c: &Compiled,
    args: &[Value],
    config: &RuntimeConfig,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<CheckReport, CompileError> {
    let base = RunOptions { mode: Mode::Oracle, ..RunOptions::default() };
    let oracle = run(c, args.to_vec(), config, &base)?;
    let oracle_rendering = rendering(&oracle.value);
    let mut runs = Vec::new();
    for seed in seeds {
        let opts = RunOptions { mode: Mode::Opportunistic, seed: Some(seed), ..base.clone() };
        let out = run(c, args.to_vec(), config, &opts)?;
        let r = rendering(&out.value);
        let value_matches = r == oracle_rendering;
        let verdict = if oracle.value.is_ok() && out.value.is_ok() {
            trace::traces_equivalent(&out.trace, &oracle.trace)
        } else {
            Ok(Verdict::Equivalent)
        };
        runs.push(CheckRun { seed, value_matches, verdict, error: out.value.err(), rendering: r.ok() });
    }
    Ok(CheckReport { oracle, oracle_rendering, runs })
}

/// Process exit status for an outcome: 0 success, 1 program error, 2 internal error.
pub fn exit_status(e: Option<&RuntimeError>) -> i32 {
    match e {
        None => 0,
        Some(e) if e.is_internal() => 2,
        Some(_) => 1,
    }
}

pub fn compile_exit_status(e: &CompileError) -> i32 {
    match e {
        CompileError::Internal(_) => 2,
        _ => 1,
    }
}

/// Summary of one run, as printed by the command line.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub wall_ms: f64,
    pub interpreter_ms: f64,
    pub wait_ms: f64,
    pub timeline: Vec<TimelineEntry>,
    /// `repr` of the result, absent when the run failed.
    pub value: Option<String>,
    pub error: Option<String>,
    pub exit_status: i32,
}

impl RunReport {
    pub fn of(o: &RunOutcome) -> RunReport {
        RunReport {
            wall_ms: o.timing.wall_ms,
            interpreter_ms: o.timing.interpreter_ms,
            wait_ms: o.timing.wait_ms,
            timeline: o.trace.timeline(),
            value: o.value.as_ref().ok().map(Value::py_repr),
            error: o.value.as_ref().err().map(ToString::to_string),
            exit_status: exit_status(o.value.as_ref().err()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub param: String,
    pub value: i64,
    pub seq_ms: f64,
    pub par_ms: f64,
    pub speedup: f64,
}

pub const BENCH_CSV_HEADER: &str = "param,value,seq_ms,par_ms,speedup";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!("{},{},{:.3},{:.3},{:.3}", self.param, self.value, self.seq_ms, self.par_ms, self.speedup)
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec<'a> {
    pub source: &'a str,
    pub kind: SourceKind,
    pub entry: Option<String>,
    pub args: Vec<Value>,
    pub param: String,
    pub values: Vec<i64>,
    pub trials: usize,
}

/// For each parameter value, the median wall time of `trials` oracle and
/// opportunistic runs. Speedup is the ratio of the medians.
pub fn bench(spec: &BenchSpec, config: &RuntimeConfig) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for &v in &spec.values {
        let opts = CompileOptions { entry: spec.entry.clone(), promotion: true, overrides: vec![(spec.param.clone(), v)] };
        let c = compile(spec.source, spec.kind, &opts)?;
        let mut seq = Vec::new();
        let mut par = Vec::new();
        for t in 0..spec.trials.max(1) {
            for (mode, acc) in [(Mode::Oracle, &mut seq), (Mode::Opportunistic, &mut par)] {
                let opts = RunOptions { mode, seed: Some(t as u64), ..RunOptions::default() };
                let out = run(&c, spec.args.clone(), config, &opts)?;
                out.value.map_err(BenchError::Run)?;
                acc.push(out.timing.wall_ms);
            }
        }
        let (seq_ms, par_ms) = (median(&mut seq), median(&mut par));
        rows.push(BenchRow { param: spec.param.clone(), value: v, seq_ms, par_ms, speedup: seq_ms / par_ms });
    }
    Ok(rows)
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Run(RuntimeError),
}
