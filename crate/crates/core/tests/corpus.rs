mod common;

use std::collections::BTreeSet;

use common::*;
use oppex::pipeline::check;
use oppex::runtime::{evaluate, Mode, RunOptions};
use oppex::trace::reference::run_reference;
use oppex::trace::EventPhase;

#[test]
fn corpus_has_at_least_25_programs() {
    let files: BTreeSet<String> = corpus().into_iter().map(|e| e.file).collect();
    assert!(files.len() >= 25, "{} programs", files.len());
}

#[test]
fn oracle_matches_reference_interpreter() {
    let cfg = corpus_config();
    for e in corpus() {
        let c = e.compiled();
        let oracle = evaluate(&c.opal, e.args(), &cfg, &RunOptions { mode: Mode::Oracle, ..RunOptions::default() }).unwrap();
        let r = run_reference(&c.optimized, e.args(), &cfg);
        let render =
            |v: &Result<oppex::runtime::value::Value, oppex::error::RuntimeError>| v.as_ref().map(|v| v.py_repr()).map_err(Clone::clone);
        assert_eq!(render(&oracle.value), render(&r.value), "{}", e.label());
        assert_eq!(oracle.output, r.output, "{}", e.label());
        if oracle.value.is_ok() {
            assert_eq!(oracle.trace.dispatch_order().unwrap(), r.calls, "{}", e.label());
        }
    }
}

#[test]
fn unoptimized_programs_compute_the_same_values() {
    let cfg = corpus_config();
    for e in corpus() {
        let c = e.compiled();
        let r = run_reference(&c.bezoar, e.args(), &cfg);
        let o = run_reference(&c.optimized, e.args(), &cfg);
        let render =
            |v: &Result<oppex::runtime::value::Value, oppex::error::RuntimeError>| v.as_ref().map(|v| v.py_repr()).map_err(Clone::clone);
        assert_eq!(render(&r.value), render(&o.value), "{}", e.label());
        assert_eq!(r.output, o.output, "{}", e.label());
    }
}

#[test]
fn opportunistic_runs_are_well_formed_and_check_against_the_oracle() {
    let cfg = corpus_config();
    for e in corpus() {
        let c = e.compiled();
        let rep = check(&c, &e.args(), &cfg, 100..103).unwrap();
        for r in &rep.runs {
            assert!(r.passed(), "{} seed {}: {:?} {:?}", e.label(), r.seed, r.error, r.verdict);
        }
        let out = evaluate(&c.opal, e.args(), &cfg, &RunOptions { seed: Some(7), ..RunOptions::default() }).unwrap();
        assert_well_formed(&out.trace);
        let t = out.timing;
        assert!(t.interpreter_ms + t.wait_ms <= t.wall_ms + 1.0, "{}: {t:?}", e.label());
        if out.value.is_ok() {
            let s = out.stats;
            assert_eq!(s.queued, s.dispatched, "{}", e.label());
            assert_eq!(s.dispatched, s.resolved, "{}", e.label());
            assert_eq!(s.signals_created, s.signals_fulfilled, "{}", e.label());
            assert_eq!(s.double_fulfills, 0, "{}", e.label());
            assert_eq!(out.trace.count(EventPhase::Queued), s.queued);
        }
    }
}

#[test]
fn some_unordered_call_overtakes_an_earlier_sequential_call() {
    let c = compile_file("get_values.py", Some("get_values"));
    let cfg = corpus_config();
    let args = oppex::pipeline::args_from_json(r#"["t", ["a", "a", "b", "b"]]"#).unwrap();
    let out = evaluate(&c.opal, args, &cfg, &RunOptions::default()).unwrap();
    let first_print_resolve = out.trace.events_of("print", EventPhase::Resolved).next().unwrap().seq;
    let llm_dispatches: Vec<_> = out.trace.events_of("llm", EventPhase::Dispatched).collect();
    assert_eq!(llm_dispatches.len(), 2);
    assert!(llm_dispatches[1].seq < first_print_resolve);
}

#[test]
fn scoping_pair() {
    let cfg = corpus_config();
    let opts = RunOptions::default();
    let read = compile_file("scope_global_read.py", None);
    let out = evaluate(&read.opal, vec![], &cfg, &opts).unwrap();
    assert!(out.value.is_ok());
    assert_eq!(out.output, vec!["foo".to_string()]);

    let unbound = compile_file("scope_local_unbound.py", None);
    let out = evaluate(&unbound.opal, vec![], &cfg, &opts).unwrap();
    let err = out.value.unwrap_err().to_string();
    assert!(err.contains("NameError: name 'x' is not defined"), "{err}");
    assert!(out.output.is_empty());
}
