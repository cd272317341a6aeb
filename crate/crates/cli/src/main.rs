use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use oppex::library::RuntimeConfig;
use oppex::pipeline::{
    self, args_from_json, bench, check, compile, compile_exit_status, BenchSpec, CompileOptions, Compiled, RunReport, SourceKind,
    BENCH_CSV_HEADER,
};
use oppex::runtime::{Mode, RunOptions, DEFAULT_MAX_LOOP_ITERATIONS};
use oppex::trace::Verdict;

#[derive(Parser)]
#[command(name = "oppex", version, about = "Compile and run annotated orchestration programs out of order")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Surface,
    Bezoar,
    BezoarOpt,
    Opal,
}

#[derive(clap::Args)]
struct Common {
    /// Source file: `.bz` for Bezoar text, anything else for surface syntax.
    file: PathBuf,
    /// Internal function to run. Without it, module-level code runs.
    #[arg(long)]
    entry: Option<String>,
    /// Skip the variable promotion passes.
    #[arg(long)]
    no_promotion: bool,
}

#[derive(clap::Args)]
struct Exec {
    /// Entry arguments as a JSON array of literals.
    #[arg(long, default_value = "[]")]
    args: String,
    /// Runtime config JSON binding externals to backends.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print one compilation stage.
    Compile {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "opal")]
        emit: Stage,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a program and print a JSON report.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: Exec,
        /// Dispatch every external call in program order.
        #[arg(long)]
        sequential: bool,
        /// Seed for mock latency jitter.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_MAX_LOOP_ITERATIONS)]
        max_loop_iterations: u64,
        /// Most iterations of a `for` loop running ahead of the oldest unfinished one.
        #[arg(long)]
        fold_window: Option<NonZeroUsize>,
        /// Write the event trace as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Write the per-call timeline as JSON.
        #[arg(long)]
        timeline_out: Option<PathBuf>,
    },
    /// Compare opportunistic runs against the sequential oracle.
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: Exec,
        #[arg(long, default_value_t = 25)]
        runs: u64,
    },
    /// Sweep an integer module constant and report sequential vs parallel time as CSV.
    Bench {
        /// Source file in surface syntax.
        file: PathBuf,
        #[arg(long)]
        entry: Option<String>,
        #[command(flatten)]
        exec: Exec,
        /// Module-level constant to substitute.
        #[arg(long)]
        param: String,
        /// Values as `lo..hi` (inclusive) or a comma-separated list.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// A failure with its exit status.
struct Failure(i32, String);

impl Failure {
    fn user(msg: impl ToString) -> Self {
        Failure(1, msg.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn load(common: &Common) -> Result<Compiled, Failure> {
    let src = read(&common.file)?;
    let opts = CompileOptions { entry: common.entry.clone(), promotion: !common.no_promotion, overrides: Vec::new() };
    compile(&src, SourceKind::of_path(&common.file), &opts).map_err(|e| Failure(compile_exit_status(&e), e.to_string()))
}

fn exec_inputs(exec: &Exec) -> Result<(Vec<oppex::runtime::value::Value>, RuntimeConfig), Failure> {
    let args = args_from_json(&exec.args).map_err(Failure::user)?;
    let config = match &exec.config {
        Some(p) => RuntimeConfig::from_json(&read(p)?).map_err(Failure::user)?,
        None => RuntimeConfig::default(),
    };
    Ok((args, config))
}

fn parse_values(s: &str) -> Result<Vec<i64>, Failure> {
    let bad = || Failure::user(format!("invalid --values `{s}`"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
        return if lo <= hi { Ok((lo..=hi).collect()) } else { Err(bad()) };
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

fn dispatch(cmd: Cmd) -> Result<i32, Failure> {
    match cmd {
        Cmd::Compile { common, emit, output } => {
            let c = load(&common)?;
            let text = match emit {
                Stage::Surface => match &c.surface {
                    Some(m) => oppex::frontend::print_module(m),
                    None => return Err(Failure::user("a Bezoar input has no surface stage")),
                },
                Stage::Bezoar => oppex::bezoar::text::print_program(&c.bezoar),
                Stage::BezoarOpt => oppex::bezoar::text::print_program(&c.optimized),
                Stage::Opal => oppex::opal::emit_opal_text(&c.opal),
            };
            match output {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Cmd::Run { common, exec, sequential, seed, max_loop_iterations, fold_window, trace_out, timeline_out } => {
            let c = load(&common)?;
            let (args, config) = exec_inputs(&exec)?;
            let mode = if sequential { Mode::Oracle } else { Mode::Opportunistic };
            let opts = RunOptions { mode, seed, echo_stdout: true, max_loop_iterations, fold_window: fold_window.map(NonZeroUsize::get) };
            let out = pipeline::run(&c, args, &config, &opts).map_err(|e| Failure(compile_exit_status(&e), e.to_string()))?;
            if let Some(p) = trace_out {
                write(&p, &out.trace.to_jsonl())?;
            }
            let report = RunReport::of(&out);
            if let Some(p) = timeline_out {
                write(&p, &serde_json::to_string_pretty(&report.timeline).expect("timeline serializes"))?;
            }
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            Ok(report.exit_status)
        }
        Cmd::Check { common, exec, runs } => {
            if runs == 0 {
                return Err(Failure::user("--runs must be at least 1"));
            }
            let c = load(&common)?;
            let (args, config) = exec_inputs(&exec)?;
            let rep = check(&c, &args, &config, 0..runs).map_err(|e| Failure(compile_exit_status(&e), e.to_string()))?;
            match &rep.oracle_rendering {
                Ok(v) => println!("oracle: {v}"),
                Err(e) => println!("oracle: {e}"),
            }
            for r in &rep.runs {
                let verdict = match &r.verdict {
                    Ok(Verdict::Equivalent) => "equivalent".to_string(),
                    Ok(Verdict::Inequivalent(w)) => format!("inequivalent: {} ({})", w.call, w.reason),
                    Err(e) => e.to_string(),
                };
                let status = if r.passed() { "PASS" } else { "FAIL" };
                let value = if r.value_matches { "value ok" } else { "value differs" };
                println!("seed {}: {status} {value}, {verdict}", r.seed);
            }
            if rep.oracle.value.as_ref().err().is_some_and(|e| e.is_internal()) {
                return Ok(2);
            }
            if rep.passed() {
                println!("PASS ({runs} runs)");
                Ok(0)
            } else {
                println!("FAIL");
                Ok(1)
            }
        }
        Cmd::Bench { file, entry, exec, param, values, trials, output } => {
            let src = read(&file)?;
            let (args, config) = exec_inputs(&exec)?;
            let spec =
                BenchSpec { source: &src, kind: SourceKind::of_path(&file), entry, args, param, values: parse_values(&values)?, trials };
            let rows = bench(&spec, &config).map_err(|e| match e {
                pipeline::BenchError::Compile(c) => Failure(compile_exit_status(&c), c.to_string()),
                pipeline::BenchError::Run(r) => Failure(pipeline::exit_status(Some(&r)), r.to_string()),
            })?;
            let mut csv = String::from(BENCH_CSV_HEADER);
            csv.push('\n');
            for r in &rows {
                csv.push_str(&r.csv());
                csv.push('\n');
            }
            match output {
                Some(p) => write(&p, &csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
    }
}
