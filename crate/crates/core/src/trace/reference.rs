//! A direct sequential interpreter for Bezoar, independent of the dataflow
//! runtime. External calls run to completion in program order; mock backends
//! reply without sleeping.

use std::any::Any;
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::CallRecord;
use crate::bezoar::ir::{Atom, Block, Callee, ConstValue, Function, Program, Stmt, VarRef, MODULE_SCOPE};
use crate::control::{apply_policy, AnnotationTable};
use crate::error::RuntimeError;
use crate::library::{self, BackendSpec, RuntimeConfig};
use crate::runtime::value::{Closure, Value};
use crate::runtime::{literal_value, program_annotations, DEFAULT_MAX_LOOP_ITERATIONS};

#[derive(Debug)]
pub struct ReferenceRun {
    pub value: Result<Value, RuntimeError>,
    /// Every external call, in execution order.
    pub calls: Vec<CallRecord>,
    pub output: Vec<String>,
}

type Vars = Rc<RefCell<HashMap<String, Value>>>;

#[derive(Clone)]
struct Env {
    /// Enclosing frames, outermost first, by scope id.
    frames: Vec<(u32, Vars)>,
    regs: HashMap<String, Value>,
}

struct FnValue {
    func: Rc<Function>,
    env: Option<Env>,
}

struct Interp<'a> {
    funcs: HashMap<&'a str, Rc<Function>>,
    table: AnnotationTable,
    config: &'a RuntimeConfig,
    globals: Vars,
    calls: Vec<CallRecord>,
    output: Vec<String>,
    loop_iterations: u64,
    max_loop_iterations: u64,
}

/// Runs the entry function of `p` on `args`.
pub fn run_reference(p: &Program, args: Vec<Value>, config: &RuntimeConfig) -> ReferenceRun {
    run_reference_with_limit(p, args, config, DEFAULT_MAX_LOOP_ITERATIONS)
}

pub fn run_reference_with_limit(p: &Program, args: Vec<Value>, config: &RuntimeConfig, max_loop_iterations: u64) -> ReferenceRun {
    let mut it = Interp {
        funcs: p.functions.iter().map(|f| (f.name.as_str(), Rc::new(f.clone()))).collect(),
        table: program_annotations(&p.externals),
        config,
        globals: Rc::new(RefCell::new(HashMap::new())),
        calls: Vec::new(),
        output: Vec::new(),
        loop_iterations: 0,
        max_loop_iterations,
    };
    let value = match it.funcs.get(p.entry.as_str()).cloned() {
        Some(f) => it.call(&f, None, args),
        None => Err(RuntimeError::Deadlock(format!("no entry function `{}`", p.entry))),
    };
    ReferenceRun { value, calls: it.calls, output: it.output }
}

fn name_error(name: &str) -> RuntimeError {
    RuntimeError::fault(name, format!("NameError: name '{name}' is not defined"))
}

impl<'a> Interp<'a> {
    fn call(&mut self, f: &Rc<Function>, env: Option<&Env>, args: Vec<Value>) -> Result<Value, RuntimeError> {
        if f.params.len() != args.len() {
            return Err(RuntimeError::fault(
                f.name.as_str(),
                format!("TypeError: {}() takes {} positional arguments but {} were given", f.name, f.params.len(), args.len()),
            ));
        }
        let mut env = env.cloned().unwrap_or_else(|| Env { frames: Vec::new(), regs: HashMap::new() });
        if f.scope != MODULE_SCOPE {
            env.frames.push((f.scope, Rc::new(RefCell::new(HashMap::new()))));
        }
        for (p, a) in f.params.iter().zip(args) {
            env.regs.insert(p.clone(), a);
        }
        self.block(&f.body, &mut env)?;
        match &f.ret {
            Some(a) => self.atom(a, &env),
            None => Ok(Value::None),
        }
    }

    fn atom(&self, a: &Atom, env: &Env) -> Result<Value, RuntimeError> {
        match a {
            Atom::Lit(l) => Ok(literal_value(l)),
            Atom::Reg(r) => {
                env.regs.get(r).cloned().ok_or_else(|| RuntimeError::Deadlock(format!("register `{r}` read before assignment")))
            }
        }
    }

    fn vars(&self, v: &VarRef, env: &Env) -> Vars {
        if v.scope == MODULE_SCOPE {
            return self.globals.clone();
        }
        env.frames
            .iter()
            .rev()
            .find(|(s, _)| *s == v.scope)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| Rc::new(RefCell::new(HashMap::new())))
    }

    fn block(&mut self, stmts: &[Stmt], env: &mut Env) -> Result<(), RuntimeError> {
        for s in stmts {
            self.stmt(s, env)?;
        }
        Ok(())
    }

    fn yields(&mut self, b: &Block, env: &mut Env) -> Result<Vec<Value>, RuntimeError> {
        self.block(&b.stmts, env)?;
        b.yields.iter().map(|a| self.atom(a, env)).collect()
    }

    fn stmt(&mut self, s: &Stmt, env: &mut Env) -> Result<(), RuntimeError> {
        match s {
            Stmt::Declare { .. } => {}
            Stmt::Store { var, value } => {
                let v = self.atom(value, env)?;
                self.vars(var, env).borrow_mut().insert(var.name.clone(), v);
            }
            Stmt::Load { dest, var } => {
                let v = self.vars(var, env).borrow().get(&var.name).cloned();
                match v {
                    Some(v) if !matches!(v, Value::Unbound) => {
                        env.regs.insert(dest.clone(), v);
                    }
                    _ => return Err(name_error(&var.name)),
                }
            }
            Stmt::Const { dest, value } => {
                let v = match value {
                    ConstValue::Lit(l) => literal_value(l),
                    ConstValue::Unbound => Value::Unbound,
                    ConstValue::Extern(n) => Value::ext(n.as_str()),
                    ConstValue::Func(n) => self.func_value(n, None)?,
                };
                env.regs.insert(dest.clone(), v);
            }
            Stmt::Copy { dest, src } => {
                let v = self.atom(src, env)?;
                env.regs.insert(dest.clone(), v);
            }
            Stmt::CheckBound { dest, src, name } => {
                let v = self.atom(&Atom::Reg(src.clone()), env)?;
                if matches!(v, Value::Unbound) {
                    return Err(name_error(name));
                }
                env.regs.insert(dest.clone(), v);
            }
            Stmt::Closure { dest, func } => {
                let f = Rc::new((**func).clone());
                let name = f.name.clone();
                let body: Rc<dyn Any> = Rc::new(FnValue { func: f, env: Some(env.clone()) });
                env.regs.insert(dest.clone(), Value::Closure(Rc::new(Closure { name, body })));
            }
            Stmt::Call { dest, callee, args } => {
                let vals = args.iter().map(|a| self.atom(a, env)).collect::<Result<Vec<_>, _>>()?;
                let v = match callee {
                    Callee::External(n) => self.external(n, vals)?,
                    Callee::Func(n) => {
                        let f =
                            self.funcs.get(n.as_str()).cloned().ok_or_else(|| RuntimeError::Deadlock(format!("unknown function `{n}`")))?;
                        self.call(&f, None, vals)?
                    }
                    Callee::Reg(r) => {
                        let f = self.atom(&Atom::Reg(r.clone()), env)?;
                        self.apply(&f, vals)?
                    }
                };
                env.regs.insert(dest.clone(), v);
            }
            Stmt::If { cond, then, orelse, outs } => {
                let c = self.atom(&Atom::Reg(cond.clone()), env)?;
                let ys = if c.truthy() { self.yields(then, env)? } else { self.yields(orelse, env)? };
                for (o, y) in outs.iter().zip(ys) {
                    env.regs.insert(o.clone(), y);
                }
            }
            Stmt::ForEach { item, iter, carried, body, outs } => {
                let list = self.atom(&Atom::Reg(iter.clone()), env)?;
                let items = library::iter_items(&list).map_err(|m| RuntimeError::fault("fold", m))?;
                for c in carried {
                    let v = self.atom(&c.init, env)?;
                    env.regs.insert(c.param.clone(), v);
                }
                for x in items {
                    env.regs.insert(item.clone(), x);
                    let ys = self.yields(body, env)?;
                    for (c, y) in carried.iter().zip(ys) {
                        env.regs.insert(c.param.clone(), y);
                    }
                }
                self.carry_out(carried.iter().map(|c| &c.param), outs, env)?;
            }
            Stmt::While { carried, cond_block, cond, body, outs } => {
                for c in carried {
                    let v = self.atom(&c.init, env)?;
                    env.regs.insert(c.param.clone(), v);
                }
                loop {
                    self.loop_iterations += 1;
                    if self.loop_iterations > self.max_loop_iterations {
                        return Err(RuntimeError::fault(
                            "while",
                            format!("RecursionError: loop iteration limit of {} exceeded", self.max_loop_iterations),
                        ));
                    }
                    self.block(cond_block, env)?;
                    if !self.atom(&Atom::Reg(cond.clone()), env)?.truthy() {
                        break;
                    }
                    let ys = self.yields(body, env)?;
                    for (c, y) in carried.iter().zip(ys) {
                        env.regs.insert(c.param.clone(), y);
                    }
                }
                self.carry_out(carried.iter().map(|c| &c.param), outs, env)?;
            }
        }
        Ok(())
    }

    fn carry_out<'r>(&self, params: impl Iterator<Item = &'r String>, outs: &[String], env: &mut Env) -> Result<(), RuntimeError> {
        let vals = params.map(|p| self.atom(&Atom::Reg(p.clone()), env)).collect::<Result<Vec<_>, _>>()?;
        for (o, v) in outs.iter().zip(vals) {
            env.regs.insert(o.clone(), v);
        }
        Ok(())
    }

    fn func_value(&self, name: &str, env: Option<Env>) -> Result<Value, RuntimeError> {
        let func = self.funcs.get(name).cloned().ok_or_else(|| RuntimeError::Deadlock(format!("unknown function `{name}`")))?;
        let body: Rc<dyn Any> = Rc::new(FnValue { func, env });
        Ok(Value::Closure(Rc::new(Closure { name: name.to_string(), body })))
    }

    fn apply(&mut self, f: &Value, args: Vec<Value>) -> Result<Value, RuntimeError> {
        match f {
            Value::Closure(c) => {
                let fv = c.body.downcast_ref::<FnValue>().ok_or_else(|| RuntimeError::Deadlock("foreign closure".into()))?;
                let (func, env) = (fv.func.clone(), fv.env.clone());
                self.call(&func, env.as_ref(), args)
            }
            Value::Ext(e) => {
                let mut all = Vec::new();
                all.extend(e.bound.clone());
                all.extend(args);
                self.external(&e.name, all)
            }
            other => Err(RuntimeError::fault("apply", format!("TypeError: '{}' object is not callable", other.type_name()))),
        }
    }

    fn external(&mut self, name: &str, args: Vec<Value>) -> Result<Value, RuntimeError> {
        let id = self.calls.len() as u64 + 1;
        let backend = self.config.backend_for(name).ok_or_else(|| RuntimeError::UnknownExternal(name.to_string()))?;
        let annotation = apply_policy(self.table.policy(name), &args);
        let rendered: Vec<String> = args.iter().map(library::canonical_render).collect();
        self.calls.push(CallRecord { call_id: id, name: name.to_string(), annotation, args: rendered.clone() });
        let r = match backend {
            BackendSpec::Builtin { op } => library::call_builtin(op.as_deref().unwrap_or(name), &args, id),
            BackendSpec::Stdout => {
                self.output.push(library::stdout_line(&args));
                Ok(Value::None)
            }
            BackendSpec::File { mode, root } => library::file_call(mode, root.as_deref(), &args),
            BackendSpec::Mock { reply, .. } => library::mock_reply(&reply, &args, id),
            BackendSpec::Http { url, method, timeout_ms } => {
                library::http_call(&url, &method, timeout_ms, rendered).and_then(|j| library::value_from_json(&j, id))
            }
        };
        r.map_err(|message| RuntimeError::Fault { name: name.to_string(), message })
    }
}
