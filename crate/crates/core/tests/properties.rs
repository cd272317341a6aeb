mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use common::assert_well_formed;
use oppex::bezoar::desugar::desugar;
use oppex::bezoar::ir::{Function, Stmt};
use oppex::frontend::{parse_module, print_module};
use oppex::library::{call_builtin, RuntimeConfig};
use oppex::opal::{is_memory_reg, is_sequence_reg, Binding, Def};
use oppex::pipeline::{compile, run, CompileOptions, Compiled, SourceKind};
use oppex::runtime::value::Value;
use oppex::runtime::{Mode, RunOptions};
use oppex::trace::reference::run_reference;
use oppex::trace::{traces_equivalent, EventPhase, Verdict};

const ANNOTATIONS: [&str; 3] = ["unordered", "readonly", "sequential"];

#[derive(Debug, Clone)]
enum Op {
    Call { ext: usize, x: usize },
    Add { x: usize, y: usize },
    Append { x: usize },
    Branch { x: usize, ext: usize, y: usize },
    Loop { n: usize, ext: usize, x: usize },
    Print { x: usize },
    Accumulate { x: usize },
    Helper { x: usize },
}

#[derive(Debug, Clone)]
struct Case {
    annotations: [usize; 3],
    latencies: [u64; 3],
    ops: Vec<Op>,
}

fn op() -> impl Strategy<Value = Op> {
    let i = || 0usize..64;
    prop_oneof![
        3 => (0usize..3, i()).prop_map(|(ext, x)| Op::Call { ext, x }),
        1 => (i(), i()).prop_map(|(x, y)| Op::Add { x, y }),
        1 => i().prop_map(|x| Op::Append { x }),
        1 => (i(), 0usize..3, i()).prop_map(|(x, ext, y)| Op::Branch { x, ext, y }),
        1 => (0usize..4, 0usize..3, i()).prop_map(|(n, ext, x)| Op::Loop { n, ext, x }),
        1 => i().prop_map(|x| Op::Print { x }),
        1 => i().prop_map(|x| Op::Accumulate { x }),
        1 => i().prop_map(|x| Op::Helper { x }),
    ]
}

fn case() -> impl Strategy<Value = Case> {
    ([0usize..3, 0usize..3, 0usize..3], [0u64..6, 0u64..6, 0u64..6], prop::collection::vec(op(), 1..9))
        .prop_map(|(annotations, latencies, ops)| Case { annotations, latencies, ops })
}

impl Case {
    fn source(&self) -> String {
        let mut vars: Vec<String> = Vec::new();
        let atom = |vars: &[String], i: usize| {
            if i.is_multiple_of(4) || vars.is_empty() {
                if i.is_multiple_of(8) {
                    "a".to_string()
                } else {
                    (i % 10).to_string()
                }
            } else {
                vars[i % vars.len()].clone()
            }
        };
        let mut body = String::from("    acc = list()\n    total = 0\n");
        for (k, o) in self.ops.iter().enumerate() {
            let v = format!("v{k}");
            match o {
                Op::Call { ext, x } => body += &format!("    {v} = e{ext}({})\n", atom(&vars, *x)),
                Op::Add { x, y } => body += &format!("    {v} = {} + {}\n", atom(&vars, *x), atom(&vars, *y)),
                Op::Append { x } => {
                    body += &format!("    acc.append({})\n", atom(&vars, *x));
                    continue;
                }
                Op::Branch { x, ext, y } => {
                    let (x, y) = (atom(&vars, *x), atom(&vars, *y));
                    body += &format!("    if {x} > 50:\n        {v} = e{ext}({y})\n    else:\n        {v} = {y} - 1\n");
                }
                Op::Loop { n, ext, x } => {
                    body += &format!("    for i in range({n}):\n        total += e{ext}(i + {})\n", atom(&vars, *x));
                    continue;
                }
                Op::Print { x } => {
                    body += &format!("    print({})\n", atom(&vars, *x));
                    continue;
                }
                Op::Accumulate { x } => {
                    body += &format!("    total = total + {}\n", atom(&vars, *x));
                    continue;
                }
                Op::Helper { x } => body += &format!("    {v} = helper({})\n", atom(&vars, *x)),
            }
            vars.push(v);
        }
        vars.extend(["total".to_string(), "len(acc)".to_string()]);
        body += &format!("    return ({},)\n", vars.join(", "));
        let mut src = String::new();
        for (i, a) in self.annotations.iter().enumerate() {
            src += &format!("@{}\nasync def e{i}(v): ...\n\n", ANNOTATIONS[*a]);
        }
        src += "@poppy\ndef helper(x):\n    y = e0(x)\n    return y * 2\n\n";
        src += &format!("@poppy\ndef main(a):\n{body}");
        src
    }

    fn config(&self) -> RuntimeConfig {
        let mut ext = serde_json::Map::new();
        for (i, l) in self.latencies.iter().enumerate() {
            ext.insert(
                format!("e{i}"),
                serde_json::json!({"backend": "mock", "latency_ms": l, "jitter": 0.8, "reply": {"rule": "hash_mod", "mod": 100}}),
            );
        }
        RuntimeConfig::from_json(&serde_json::json!({ "externals": ext }).to_string()).unwrap()
    }

    fn compile(&self, promotion: bool) -> Compiled {
        let opts = CompileOptions { entry: Some("main".into()), promotion, overrides: Vec::new() };
        compile(&self.source(), SourceKind::Surface, &opts).unwrap_or_else(|e| panic!("{e}\n{}", self.source()))
    }
}

/// Every register is defined once per function and before each use.
fn check_anf(f: &Function, outer: &HashSet<String>) -> Result<(), String> {
    fn block(stmts: &[Stmt], env: &mut HashSet<String>, seen: &mut HashSet<String>) -> Result<(), String> {
        let define = |r: &String, env: &mut HashSet<String>, seen: &mut HashSet<String>| {
            if !seen.insert(r.clone()) {
                return Err(format!("`{r}` defined twice"));
            }
            env.insert(r.clone());
            Ok(())
        };
        let defined = |r: &String, env: &HashSet<String>| {
            if env.contains(r) {
                Ok(())
            } else {
                Err(format!("`{r}` used before definition"))
            }
        };
        for s in stmts {
            for u in s.uses() {
                defined(u, env)?;
            }
            match s {
                Stmt::If { then, orelse, .. } => {
                    for b in [then, orelse] {
                        let mut inner = env.clone();
                        block(&b.stmts, &mut inner, seen)?;
                        for y in b.yields.iter().filter_map(|a| a.reg()) {
                            defined(y, &inner)?;
                        }
                    }
                }
                Stmt::ForEach { item, carried, body, .. } => {
                    let mut inner = env.clone();
                    define(item, &mut inner, seen)?;
                    for c in carried {
                        define(&c.param, &mut inner, seen)?;
                    }
                    block(&body.stmts, &mut inner, seen)?;
                    for y in body.yields.iter().filter_map(|a| a.reg()) {
                        defined(y, &inner)?;
                    }
                }
                Stmt::While { carried, cond_block, cond, body, .. } => {
                    let mut inner = env.clone();
                    for c in carried {
                        define(&c.param, &mut inner, seen)?;
                    }
                    block(cond_block, &mut inner, seen)?;
                    defined(cond, &inner)?;
                    block(&body.stmts, &mut inner, seen)?;
                    for y in body.yields.iter().filter_map(|a| a.reg()) {
                        defined(y, &inner)?;
                    }
                }
                Stmt::Closure { func, .. } => check_anf(func, env)?,
                _ => {}
            }
            for d in s.defs() {
                define(d, env, seen)?;
            }
        }
        Ok(())
    }
    let mut env = outer.clone();
    let mut seen = HashSet::new();
    for p in &f.params {
        if !seen.insert(p.clone()) {
            return Err(format!("{}: parameter `{p}` repeated", f.name));
        }
        env.insert(p.clone());
    }
    block(&f.body, &mut env, &mut seen).map_err(|e| format!("{}: {e}", f.name))?;
    if let Some(r) = f.ret.as_ref().and_then(|a| a.reg()) {
        if !env.contains(r) {
            return Err(format!("{}: returns undefined `{r}`", f.name));
        }
    }
    Ok(())
}

/// S registers form one chain through each definition, each consumed once; M
/// registers are read only at their latest version.
fn check_threading(d: &Def, entry_s: Option<&String>, entry_m: Option<&String>) -> Result<(), String> {
    let seq = |rs: Vec<&String>| rs.into_iter().filter(|r| is_sequence_reg(r)).cloned().collect::<Vec<_>>();
    let mem = |rs: Vec<&String>| rs.into_iter().filter(|r| is_memory_reg(r)).cloned().collect::<Vec<_>>();
    let mut s = d.params.iter().find(|p| is_sequence_reg(p)).or(entry_s).cloned();
    let mut m = d.params.iter().find(|p| is_memory_reg(p)).or(entry_m).cloned();
    let nested: HashMap<&str, &Def> =
        d.body.iter().filter_map(|b| if let Binding::Def(n) = b { Some((n.name.as_str(), &**n)) } else { None }).collect();
    let mut branches = HashSet::new();
    let err = |msg: String| Err(format!("{}: {msg}", d.name));
    for b in &d.body {
        match b {
            Binding::Def(_) => {}
            Binding::Ite { then, orelse, outs, .. } => {
                for name in [then, orelse] {
                    branches.insert(name.as_str());
                    check_threading(nested[name.as_str()], s.as_ref(), m.as_ref())?;
                }
                let (so, mo) = (seq(outs.iter().collect()), mem(outs.iter().collect()));
                if so.len() != usize::from(s.is_some()) || mo.len() != usize::from(m.is_some()) {
                    return err(format!("ite outs {outs:?} do not carry the chain"));
                }
                s = so.into_iter().next();
                m = mo.into_iter().next();
            }
            _ => {
                let (su, sd) = (seq(b.uses()), seq(b.defs()));
                if !su.is_empty() {
                    if s.is_none() || su != [s.clone().unwrap()] || sd.len() != 1 {
                        return err(format!("{b:?} breaks the S chain at {s:?}"));
                    }
                    s = sd.into_iter().next();
                } else if !sd.is_empty() {
                    return err(format!("{b:?} creates S from nothing"));
                }
                let (mu, md) = (mem(b.uses()), mem(b.defs()));
                if mu.iter().any(|r| Some(r) != m.as_ref()) {
                    return err(format!("{b:?} reads a stale M, current {m:?}"));
                }
                if !md.is_empty() {
                    if mu.is_empty() || md.len() != 1 {
                        return err(format!("{b:?} creates M from nothing"));
                    }
                    m = md.into_iter().next();
                }
            }
        }
    }
    let ret: Vec<&String> = d.ret.iter().filter_map(|a| a.reg()).collect();
    if seq(ret.clone()) != s.iter().cloned().collect::<Vec<_>>() {
        return err(format!("returns {:?}, chain ends at {s:?}", d.ret));
    }
    if m.is_some() && mem(ret) != m.iter().cloned().collect::<Vec<_>>() {
        return err(format!("returns {:?}, memory ends at {m:?}", d.ret));
    }
    for (name, n) in nested {
        if !branches.contains(name) {
            check_threading(n, None, None)?;
        }
    }
    Ok(())
}

fn opts(mode: Mode, seed: Option<u64>) -> RunOptions {
    RunOptions { mode, seed, ..RunOptions::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn printing_then_parsing_is_identity(c in case()) {
        let m = parse_module(&c.source()).unwrap();
        let again = parse_module(&print_module(&m)).unwrap();
        prop_assert_eq!(m.without_spans(), again.without_spans());
    }

    #[test]
    fn desugaring_is_idempotent(c in case()) {
        let d = desugar(&parse_module(&c.source()).unwrap());
        prop_assert_eq!(desugar(&d).without_spans(), d.without_spans());
    }

    #[test]
    fn compiled_code_is_well_formed(c in case(), promotion in any::<bool>()) {
        let compiled = c.compile(promotion);
        for p in [&compiled.bezoar, &compiled.optimized] {
            for f in &p.functions {
                if let Err(e) = check_anf(f, &HashSet::new()) {
                    return Err(TestCaseError::fail(format!("{e}\n{}", c.source())));
                }
            }
        }
        for d in &compiled.opal.defs {
            if let Err(e) = check_threading(d, None, None) {
                return Err(TestCaseError::fail(format!("{e}\n{}", oppex::opal::emit_opal_text(&compiled.opal))));
            }
        }
    }

    #[test]
    fn optimization_and_compilation_preserve_sequential_behaviour(c in case(), a in -5i64..120) {
        let cfg = c.config();
        let plain = c.compile(false);
        let opt = c.compile(true);
        let r0 = run_reference(&plain.optimized, vec![Value::Int(a)], &cfg);
        let r1 = run_reference(&opt.optimized, vec![Value::Int(a)], &cfg);
        prop_assert_eq!(r0.value.as_ref().map(Value::py_repr), r1.value.as_ref().map(Value::py_repr));
        prop_assert_eq!(&r0.calls, &r1.calls);
        prop_assert_eq!(&r0.output, &r1.output);
        for compiled in [&plain, &opt] {
            let oracle = run(compiled, vec![Value::Int(a)], &cfg, &opts(Mode::Oracle, None)).unwrap();
            prop_assert_eq!(oracle.value.as_ref().map(Value::py_repr), r1.value.as_ref().map(Value::py_repr));
            prop_assert_eq!(oracle.trace.dispatch_order().unwrap(), r1.calls.clone());
            prop_assert_eq!(&oracle.output, &r1.output);
        }
    }

    #[test]
    fn opportunistic_runs_agree_with_the_oracle(c in case(), a in -5i64..120, s1 in any::<u64>(), s2 in any::<u64>(), window in 1usize..4) {
        let cfg = c.config();
        let compiled = c.compile(true);
        let args = vec![Value::Int(a)];
        let oracle = run(&compiled, args.clone(), &cfg, &opts(Mode::Oracle, None)).unwrap();
        let expect = oracle.value.as_ref().map(Value::py_repr).unwrap();
        for (seed, fold_window) in [(s1, None), (s2, Some(window))] {
            let o = RunOptions { fold_window, ..opts(Mode::Opportunistic, Some(seed)) };
            let par = run(&compiled, args.clone(), &cfg, &o).unwrap();
            assert_well_formed(&par.trace);
            prop_assert_eq!(par.value.as_ref().map(Value::py_repr).unwrap(), expect.clone());
            prop_assert_eq!(traces_equivalent(&par.trace, &oracle.trace).unwrap(), Verdict::Equivalent);
            prop_assert_eq!(&par.output, &oracle.output);
            let count = |p| par.trace.events.iter().filter(|e| e.phase == p).count();
            prop_assert_eq!(count(EventPhase::Queued), count(EventPhase::Dispatched));
            prop_assert_eq!(count(EventPhase::Dispatched), count(EventPhase::Resolved));
            prop_assert_eq!(par.stats.signals_created, par.stats.signals_fulfilled);
            prop_assert_eq!(par.stats.double_fulfills, 0);
        }
    }
}

fn py_floordiv(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn py_mod(a: i64, b: i64) -> i64 {
    a - b * py_floordiv(a, b)
}

fn builtin(op: &str, args: &[Value]) -> Result<String, String> {
    call_builtin(op, args, 1).map(|v| v.py_repr())
}

fn int_tuple(xs: &[i64]) -> Value {
    Value::tuple(xs.iter().map(|x| Value::Int(*x)).collect())
}

fn tuple_repr(xs: &[i64]) -> String {
    match xs {
        [x] => format!("({x},)"),
        _ => format!("({})", xs.iter().map(i64::to_string).collect::<Vec<_>>().join(", ")),
    }
}

proptest! {
    #[test]
    fn integer_operators_follow_host_semantics(a in -1000i64..1000, b in -1000i64..1000, e in 0i64..6, sh in 0i64..8) {
        let (x, y) = (Value::Int(a), Value::Int(b));
        let xy = [x.clone(), y.clone()];
        prop_assert_eq!(builtin("add", &xy), Ok((a + b).to_string()));
        prop_assert_eq!(builtin("sub", &xy), Ok((a - b).to_string()));
        prop_assert_eq!(builtin("mul", &xy), Ok((a * b).to_string()));
        prop_assert_eq!(builtin("and_", &xy), Ok((a & b).to_string()));
        prop_assert_eq!(builtin("or_", &xy), Ok((a | b).to_string()));
        prop_assert_eq!(builtin("xor", &xy), Ok((a ^ b).to_string()));
        prop_assert_eq!(builtin("pow", &[x.clone(), Value::Int(e)]), Ok(a.pow(e as u32).to_string()));
        prop_assert_eq!(builtin("lshift", &[x.clone(), Value::Int(sh)]), Ok((a << sh).to_string()));
        prop_assert_eq!(builtin("rshift", &[x.clone(), Value::Int(sh)]), Ok((a >> sh).to_string()));
        if b != 0 {
            prop_assert_eq!(builtin("floordiv", &xy), Ok(py_floordiv(a, b).to_string()));
            prop_assert_eq!(builtin("mod", &xy), Ok(py_mod(a, b).to_string()));
        } else {
            prop_assert!(builtin("floordiv", &xy).unwrap_err().starts_with("ZeroDivisionError"));
            prop_assert!(builtin("mod", &xy).unwrap_err().starts_with("ZeroDivisionError"));
        }
        let py_bool = |v: bool| if v { "True".to_string() } else { "False".to_string() };
        prop_assert_eq!(builtin("lt", &xy), Ok(py_bool(a < b)));
        prop_assert_eq!(builtin("le", &xy), Ok(py_bool(a <= b)));
        prop_assert_eq!(builtin("gt", &xy), Ok(py_bool(a > b)));
        prop_assert_eq!(builtin("ge", &xy), Ok(py_bool(a >= b)));
        prop_assert_eq!(builtin("eq", &xy), Ok(py_bool(a == b)));
        prop_assert_eq!(builtin("ne", &xy), Ok(py_bool(a != b)));
        prop_assert_eq!(builtin("neg", std::slice::from_ref(&x)), Ok((-a).to_string()));
        prop_assert_eq!(builtin("invert", std::slice::from_ref(&x)), Ok((!a).to_string()));
        prop_assert_eq!(builtin("abs", std::slice::from_ref(&x)), Ok(a.abs().to_string()));
        prop_assert_eq!(builtin("min", &xy), Ok(a.min(b).to_string()));
        prop_assert_eq!(builtin("max", &xy), Ok(a.max(b).to_string()));
        prop_assert_eq!(builtin("not_", std::slice::from_ref(&x)), Ok(py_bool(a == 0)));
        prop_assert_eq!(builtin("bool", std::slice::from_ref(&x)), Ok(py_bool(a != 0)));
        prop_assert_eq!(builtin("str", std::slice::from_ref(&x)), Ok(format!("'{a}'")));
        prop_assert_eq!(builtin("int", &[Value::text(a.to_string())]), Ok(a.to_string()));
        prop_assert_eq!(builtin("truediv", &[Value::Int(a), Value::Int(4)]), Ok(format!("{:?}", a as f64 / 4.0)));
    }

    #[test]
    fn sequence_operators_follow_host_semantics(xs in prop::collection::vec(-20i64..20, 0..6), ys in prop::collection::vec(-20i64..20, 0..6), i in -8i64..8, k in -20i64..20) {
        let (tx, ty) = (int_tuple(&xs), int_tuple(&ys));
        let joined: Vec<i64> = xs.iter().chain(&ys).copied().collect();
        prop_assert_eq!(builtin("add", &[tx.clone(), ty.clone()]), Ok(tuple_repr(&joined)));
        prop_assert_eq!(builtin("len", std::slice::from_ref(&tx)), Ok(xs.len().to_string()));
        let contains = if xs.contains(&k) { "True" } else { "False" };
        prop_assert_eq!(builtin("contains", &[tx.clone(), Value::Int(k)]), Ok(contains.to_string()));
        let n = xs.len() as i64;
        let idx = if i < 0 { i + n } else { i };
        if (0..n).contains(&idx) {
            prop_assert_eq!(builtin("getitem", &[tx.clone(), Value::Int(i)]), Ok(xs[idx as usize].to_string()));
        } else {
            prop_assert!(builtin("getitem", &[tx.clone(), Value::Int(i)]).unwrap_err().starts_with("IndexError"));
        }
        let mut sorted = xs.clone();
        sorted.sort();
        let list = format!("[{}]", sorted.iter().map(i64::to_string).collect::<Vec<_>>().join(", "));
        prop_assert_eq!(builtin("sorted", std::slice::from_ref(&tx)), Ok(list));
        prop_assert_eq!(builtin("sum", std::slice::from_ref(&tx)), Ok(xs.iter().sum::<i64>().to_string()));
        prop_assert_eq!(builtin("eq", &[tx.clone(), ty.clone()]), Ok(if xs == ys { "True" } else { "False" }.to_string()));
        prop_assert_eq!(builtin("lt", &[tx.clone(), ty.clone()]), Ok(if xs < ys { "True" } else { "False" }.to_string()));
        let range: Vec<i64> = (0..k.max(0)).collect();
        prop_assert_eq!(builtin("tuple", &[call_builtin("range", &[Value::Int(k)], 1).unwrap()]), Ok(tuple_repr(&range)));
    }

    #[test]
    fn string_methods_follow_host_semantics(s in "[a-zA-Z ,]{0,12}") {
        let v = Value::text(s.as_str());
        let q = |t: &str| format!("'{t}'");
        prop_assert_eq!(builtin("str.upper", std::slice::from_ref(&v)), Ok(q(&s.to_uppercase())));
        prop_assert_eq!(builtin("str.lower", std::slice::from_ref(&v)), Ok(q(&s.to_lowercase())));
        prop_assert_eq!(builtin("str.strip", std::slice::from_ref(&v)), Ok(q(s.trim_matches(' '))));
        let parts: Vec<String> = s.split(',').map(q).collect();
        prop_assert_eq!(builtin("str.split", &[v.clone(), Value::text(",")]), Ok(format!("[{}]", parts.join(", "))));
        prop_assert_eq!(builtin("len", std::slice::from_ref(&v)), Ok(s.chars().count().to_string()));
        prop_assert_eq!(builtin("str.count", &[v.clone(), Value::text("a")]), Ok(s.matches('a').count().to_string()));
        let found = s.find(',').map_or(-1, |i| i as i64);
        prop_assert_eq!(builtin("str.find", &[v.clone(), Value::text(",")]), Ok(found.to_string()));
        prop_assert_eq!(builtin("add", &[v.clone(), Value::text("!")]), Ok(q(&format!("{s}!"))));
    }
}

#[test]
fn corpus_programs_are_well_formed() {
    for e in common::corpus() {
        let c = e.compiled();
        for p in [&c.bezoar, &c.optimized] {
            for f in &p.functions {
                check_anf(f, &HashSet::new()).unwrap_or_else(|m| panic!("{}: {m}", e.label()));
            }
        }
        for d in &c.opal.defs {
            check_threading(d, None, None).unwrap_or_else(|m| panic!("{}: {m}", e.label()));
        }
    }
}
