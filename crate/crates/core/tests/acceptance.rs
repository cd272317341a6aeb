//! Acceptance suite. Runs without the libtest harness and prints one line per
//! criterion; exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use oppex::control::Annotation;
use oppex::library::RuntimeConfig;
use oppex::opal::emit_opal_text;
use oppex::pipeline::{args_from_json, bench, check, compile, run, BenchSpec, CompileOptions, SourceKind};
use oppex::runtime::value::Value;
use oppex::runtime::{Mode, RunOptions};
use oppex::trace::{brute_force_equivalent, traces_equivalent, CallRecord, EventPhase, Trace};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn opts(mode: Mode, seed: Option<u64>) -> RunOptions {
    RunOptions { mode, seed, ..RunOptions::default() }
}

fn t_of(t: &Trace, id: u64, phase: EventPhase) -> f64 {
    t.events.iter().find(|e| e.call_id == id && e.phase == phase).map(|e| e.t_ms).unwrap_or(f64::NAN)
}

/// A copy of the corpus config with every mock latency replaced.
fn corpus_config_with_latency(ms: f64) -> RuntimeConfig {
    let mut j: serde_json::Value = serde_json::from_str(&source("corpus_config.json")).unwrap();
    for (_, spec) in j["externals"].as_object_mut().unwrap() {
        spec["latency_ms"] = serde_json::json!(ms);
    }
    RuntimeConfig::from_json(&j.to_string()).unwrap()
}

fn get_values_args() -> Vec<Value> {
    args_from_json(r#"["task", ["a", "a", "b", "b"]]"#).unwrap()
}

fn soundness() -> Outcome {
    let start = Instant::now();
    let cfg = corpus_config();
    let corpus = corpus();
    ensure(corpus.len() >= 25, format!("corpus has {} programs", corpus.len()))?;
    for file in ["tot_mini.py", "get_values.py", "branch_store.bz", "scope_global_read.py", "scope_local_unbound.py"] {
        ensure(corpus.iter().any(|e| e.file == file), format!("{file} missing from corpus"))?;
    }
    let mut runs = 0;
    for e in &corpus {
        let rep = check(&e.compiled(), &e.args(), &cfg, 0..25).map_err(|err| format!("{}: {err}", e.label()))?;
        if !rep.passed() {
            let bad = rep.runs.iter().find(|r| !r.passed()).unwrap();
            return Err(format!("{} seed {}: value_matches={} verdict={:?}", e.label(), bad.seed, bad.value_matches, bad.verdict));
        }
        runs += rep.runs.len();
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} programs, {runs} parallel runs equivalent to the oracle in {secs:.1}s (limit 300s)", corpus.len()))
}

fn get_values_overlap() -> Outcome {
    let c = compile_file("get_values.py", Some("get_values"));
    let out = run(&c, get_values_args(), &mock_config(&["llm"], 100.0), &RunOptions::default()).unwrap();
    out.value.as_ref().map_err(|e| e.to_string())?;
    let t = &out.trace;
    let first_resolve = t.events_of("llm", EventPhase::Resolved).map(|e| e.seq).min().ok_or("no llm call")?;
    let early = t.events_of("llm", EventPhase::Dispatched).filter(|e| e.seq < first_resolve).count();
    ensure(early == 2, format!("{early} llm dispatches before the first llm resolve"))?;
    let prints: Vec<_> = t.events_of("print", EventPhase::Dispatched).collect();
    ensure(prints.len() == 4, format!("{} prints", prints.len()))?;
    ensure(prints.iter().all(|e| e.annotation == Some(Annotation::Sequential)), "print not Sequential")?;
    for (i, line) in out.output.iter().enumerate() {
        ensure(line.starts_with(&format!("{i}: ")), format!("print {i} was `{line}`"))?;
    }
    let wall = out.timing.wall_ms;
    ensure(wall < 300.0, format!("wall {wall:.1}ms"))?;
    Ok(format!("2 llm dispatches before first resolve, prints in order 0..3, wall {wall:.1}ms (limit 300ms)"))
}

fn golden() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests");
    let src = std::fs::read_to_string(dir.join("programs/branch_store.bz")).unwrap();
    let expect = std::fs::read_to_string(dir.join("golden/branch_store.opal")).unwrap();
    let opts = CompileOptions { entry: Some("main".into()), ..CompileOptions::default() };
    let texts: Vec<String> = (0..5).map(|_| emit_opal_text(&compile(&src, SourceKind::Bezoar, &opts).unwrap().opal)).collect();
    ensure(texts.iter().all(|t| *t == expect), format!("output differs from golden:\n{}", texts[0]))?;
    for needle in ["M1 := store(M0", "def _then():", "def _else():", "M3, S3 := ite(r0, _then, _else)"] {
        ensure(expect.contains(needle), format!("golden lacks `{needle}`"))?;
    }
    Ok("5 compilations byte-identical to the golden listing".into())
}

fn fanout() -> Outcome {
    let c = compile_file("fanout.py", Some("main"));
    let cfg = mock_config(&["score"], 100.0);
    let seq = run(&c, vec![], &cfg, &opts(Mode::Oracle, None)).unwrap();
    let par = run(&c, vec![], &cfg, &RunOptions::default()).unwrap();
    let (s, p) = (seq.timing.wall_ms, par.timing.wall_ms);
    ensure(seq.value.is_ok() && par.value.is_ok(), "run failed")?;
    ensure(s >= 950.0 && p <= 300.0, format!("sequential {s:.1}ms, parallel {p:.1}ms"))?;
    Ok(format!("sequential {s:.1}ms (>= 950), parallel {p:.1}ms (<= 300), speedup {:.2}x", s / p))
}

fn scaling() -> Outcome {
    let src = source("tot_mini.py");
    let spec = BenchSpec {
        source: &src,
        kind: SourceKind::Surface,
        entry: Some("tree_of_thoughts".into()),
        args: args_from_json(r#"["task"]"#).unwrap(),
        param: "BEAM_WIDTH".into(),
        values: (1..=8).collect(),
        trials: 5,
    };
    let rows = bench(&spec, &corpus_config()).map_err(|e| format!("{e:?}"))?;
    let speedups: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
    let shown = speedups.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>().join(" ");
    ensure(speedups[0] >= 1.0, format!("width 1 speedup {:.2}", speedups[0]))?;
    for w in speedups.windows(2) {
        ensure(w[1] >= 0.9 * w[0], format!("speedups dropped: {shown}"))?;
    }
    Ok(format!("median speedups for widths 1..8: {shown}"))
}

fn promotion() -> Outcome {
    let cfg = mock_config(&["llm"], 50.0);
    let llm_times = |promotion: bool| {
        let c = compile_with("get_values.py", Some("get_values"), promotion);
        let out = run(&c, get_values_args(), &cfg, &RunOptions::default()).unwrap();
        let t = out.trace;
        let ids: Vec<u64> = t.events_of("llm", EventPhase::Dispatched).map(|e| e.call_id).collect();
        (t_of(&t, ids[0], EventPhase::Resolved), t_of(&t, ids[1], EventPhase::Dispatched))
    };
    let (r1, d2) = llm_times(false);
    ensure(d2 >= r1, format!("without promotion second llm dispatched at {d2:.1}ms before first resolved at {r1:.1}ms"))?;
    let (pr1, pd2) = llm_times(true);
    ensure(pd2 < pr1, format!("with promotion second llm dispatched at {pd2:.1}ms after first resolved at {pr1:.1}ms"))?;
    Ok(format!("no promotion: 2nd dispatch {d2:.1}ms >= 1st resolve {r1:.1}ms; promotion: {pd2:.1}ms < {pr1:.1}ms"))
}

fn overhead() -> Outcome {
    let c = compile_file("arith_loop.py", Some("main"));
    let out = run(&c, vec![Value::Int(2000)], &RuntimeConfig::default(), &RunOptions::default()).unwrap();
    out.value.as_ref().map_err(|e| e.to_string())?;
    let ops = out.trace.count(EventPhase::Dispatched);
    ensure(ops >= 10_000, format!("only {ops} operations"))?;
    let loop_ms = out.timing.interpreter_ms;
    ensure(loop_ms < 2000.0, format!("{ops} operations took {loop_ms:.1}ms"))?;
    let g = compile_file("get_values.py", Some("get_values"));
    let out = run(&g, get_values_args(), &mock_config(&["llm"], 100.0), &RunOptions::default()).unwrap();
    let (i, w) = (out.timing.interpreter_ms, out.timing.wall_ms);
    ensure(i < 0.1 * w, format!("interpreter {i:.1}ms of wall {w:.1}ms"))?;
    Ok(format!("{ops} operations in {loop_ms:.1}ms (limit 2000); get_values interpreter {i:.2}ms of wall {w:.1}ms"))
}

const ANNOTATIONS: [Annotation; 3] = [Annotation::Sequential, Annotation::ReadOnly, Annotation::Unordered];

fn decorator(a: Annotation) -> &'static str {
    match a {
        Annotation::Sequential => "sequential",
        Annotation::ReadOnly => "readonly",
        Annotation::Unordered => "unordered",
    }
}

/// Whether a call annotated `later` must wait for an earlier call annotated `earlier`.
fn must_wait(earlier: Annotation, later: Annotation) -> bool {
    use Annotation::*;
    matches!((earlier, later), (Sequential, Sequential | ReadOnly) | (ReadOnly, Sequential))
}

fn permutations() -> Vec<[usize; 3]> {
    vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
}

/// A trace whose calls run one at a time in the given order.
fn serial_trace(calls: &[CallRecord]) -> Trace {
    let mut t = Trace::default();
    let mut clock = 0.0;
    for c in calls {
        for phase in [EventPhase::Queued, EventPhase::Dispatched, EventPhase::Resolved] {
            t.push(c.call_id, phase, &c.name, Some(c.annotation), c.args.clone(), clock);
            clock += 1.0;
        }
    }
    t
}

fn lock_protocol() -> Outcome {
    let latencies = [15.0, 30.0, 45.0];
    let mut cases = 0;
    let mut reorderings = 0;
    let mut rejected = 0;
    for a in ANNOTATIONS {
        for b in ANNOTATIONS {
            for c in ANNOTATIONS {
                let anns = [a, b, c];
                let mut src = String::from("@poppy\ndef main():\n    x = c0(1)\n    y = c1(2)\n    z = c2(3)\n    return (x, y, z)\n");
                for (i, ann) in anns.iter().enumerate() {
                    src += &format!("\n@{}\nasync def c{i}(v): ...\n", decorator(*ann));
                }
                let compiled = compile_src(&src, Some("main"));
                for perm in permutations() {
                    let mut ext = serde_json::Map::new();
                    for (i, p) in perm.iter().enumerate() {
                        ext.insert(
                            format!("c{i}"),
                            serde_json::json!({"backend": "mock", "latency_ms": latencies[*p], "reply": {"rule": "hash_mod", "mod": 10}}),
                        );
                    }
                    let cfg = RuntimeConfig::from_json(&serde_json::json!({ "externals": ext }).to_string()).unwrap();
                    let label = format!("{anns:?} latencies {perm:?}");
                    let par = run(&compiled, vec![], &cfg, &RunOptions::default()).unwrap();
                    let seq = run(&compiled, vec![], &cfg, &opts(Mode::Oracle, None)).unwrap();
                    let t = &par.trace;
                    let id = |i: usize| t.events_of(&format!("c{i}"), EventPhase::Queued).next().unwrap().call_id;
                    let ids = [id(0), id(1), id(2)];
                    for j in 0..3 {
                        let dispatch = t_of(t, ids[j], EventPhase::Dispatched);
                        let mut expected: f64 = 0.0;
                        for i in 0..j {
                            if must_wait(anns[i], anns[j]) {
                                let resolve = t_of(t, ids[i], EventPhase::Resolved);
                                ensure(dispatch >= resolve, format!("{label}: c{j} dispatched before c{i} resolved"))?;
                                expected = expected.max(resolve);
                            }
                        }
                        ensure(dispatch - expected < 5.0, format!("{label}: c{j} dispatched at {dispatch:.1}ms, free at {expected:.1}ms"))?;
                    }
                    let verdict = traces_equivalent(t, &seq.trace).map_err(|e| e.to_string())?;
                    let oracle_calls = seq.trace.dispatch_order().unwrap();
                    let par_calls = t.dispatch_order().unwrap();
                    ensure(verdict.is_equivalent(), format!("{label}: {verdict:?}"))?;
                    ensure(brute_force_equivalent(&par_calls, &oracle_calls), format!("{label}: brute force disagrees"))?;
                    for order in permutations() {
                        let mut reordered: Vec<CallRecord> = order.iter().map(|i| oracle_calls[*i].clone()).collect();
                        reordered.extend(oracle_calls[3..].iter().cloned());
                        let fast = traces_equivalent(&serial_trace(&reordered), &seq.trace).map_err(|e| e.to_string())?;
                        let slow = brute_force_equivalent(&reordered, &oracle_calls);
                        ensure(fast.is_equivalent() == slow, format!("{label}: checkers disagree on order {order:?}"))?;
                        reorderings += 1;
                        rejected += usize::from(!slow);
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} schedules safe and maximally concurrent; checkers agree on {reorderings} reorderings ({rejected} rejected)"))
}

fn confluence() -> Outcome {
    let cfg = corpus_config_with_latency(4.0);
    let corpus = corpus();
    let results: Vec<Result<(), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = corpus
            .iter()
            .map(|e| {
                let cfg = &cfg;
                s.spawn(move || {
                    let c = e.compiled();
                    let render = |seed: Option<u64>, mode| {
                        let out = run(&c, e.args(), cfg, &opts(mode, seed)).unwrap();
                        match out.value {
                            Ok(v) => v.py_repr(),
                            Err(err) => format!("error: {err}"),
                        }
                    };
                    let expect = render(None, Mode::Oracle);
                    for seed in 0..50 {
                        let got = render(Some(seed), Mode::Opportunistic);
                        if got != expect {
                            return Err(format!("{} seed {seed}: {got} != {expect}", e.label()));
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for r in results {
        r?;
    }
    Ok(format!("{} programs x 50 schedules render identically", corpus.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("soundness", soundness),
        ("get_values overlap", get_values_overlap),
        ("golden translation", golden),
        ("fan-out parallelism", fanout),
        ("beam width scaling", scaling),
        ("promotion necessity", promotion),
        ("interpreter overhead", overhead),
        ("lock protocol", lock_protocol),
        ("confluence", confluence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|x| *x == n.to_string() || name.contains(x.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({why})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
