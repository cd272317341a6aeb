//! Single-assignment promotion: a variable stored once, before every load,
//! becomes an immutable register.

use std::collections::{BTreeMap, HashMap};

use super::Namer;
use crate::bezoar::anf::{MAIN, MODULE_BODY};
use crate::bezoar::ir::*;

/// Statement position: per nesting level, the statement index and the sub-block taken (0 = the statement itself).
type Pos = Vec<(usize, u8)>;

#[derive(Debug, Clone)]
struct Access {
    pos: Option<Pos>,
    in_closure: bool,
    in_loop: bool,
}

#[derive(Debug, Default)]
struct Info {
    stores: Vec<(Access, Atom)>,
    loads: Vec<Access>,
}

struct Frame {
    scope: u32,
    path: Pos,
    loop_depth: usize,
}

#[derive(Default)]
struct Collector {
    vars: BTreeMap<VarRef, Info>,
    /// Positions of calls in the module-scope entry function.
    entry_calls: Vec<Pos>,
    /// Constants bound at the top level of the module-scope entry function.
    entry_consts: HashMap<Reg, ConstValue>,
}

impl Collector {
    fn access(&self, var: &VarRef, frames: &[Frame]) -> Access {
        let top = frames.len() - 1;
        match frames.iter().rposition(|f| f.scope == var.scope) {
            Some(j) => Access { pos: Some(frames[j].path.clone()), in_closure: j != top, in_loop: frames[j].loop_depth > 0 },
            None => Access { pos: None, in_closure: true, in_loop: false },
        }
    }

    fn walk(&mut self, stmts: &[Stmt], frames: &mut Vec<Frame>) {
        for (i, s) in stmts.iter().enumerate() {
            frames.last_mut().unwrap().path.push((i, 0));
            match s {
                Stmt::Store { var, value } => {
                    let a = self.access(var, frames);
                    self.vars.entry(var.clone()).or_default().stores.push((a, value.clone()));
                }
                Stmt::Load { var, .. } => {
                    let a = self.access(var, frames);
                    self.vars.entry(var.clone()).or_default().loads.push(a);
                }
                Stmt::Declare { var } => {
                    self.vars.entry(var.clone()).or_default();
                }
                Stmt::Const { dest, value } if frames.len() == 1 && frames[0].scope == MODULE_SCOPE => {
                    if frames[0].path.len() == 1 {
                        self.entry_consts.insert(dest.clone(), value.clone());
                    }
                }
                Stmt::Call { .. } if frames.len() == 1 && frames[0].scope == MODULE_SCOPE => {
                    self.entry_calls.push(frames[0].path.clone());
                }
                Stmt::If { then, orelse, .. } => {
                    self.sub(frames, 1, &then.stmts, false);
                    self.sub(frames, 2, &orelse.stmts, false);
                }
                Stmt::ForEach { body, .. } => self.sub(frames, 3, &body.stmts, true),
                Stmt::While { cond_block, body, .. } => {
                    self.sub(frames, 4, cond_block, true);
                    self.sub(frames, 5, &body.stmts, true);
                }
                Stmt::Closure { func, .. } => {
                    frames.push(Frame { scope: func.scope, path: Vec::new(), loop_depth: 0 });
                    self.walk(&func.body, frames);
                    frames.pop();
                }
                _ => {}
            }
            frames.last_mut().unwrap().path.pop();
        }
    }

    fn sub(&mut self, frames: &mut Vec<Frame>, slot: u8, stmts: &[Stmt], is_loop: bool) {
        let f = frames.last_mut().unwrap();
        f.path.last_mut().unwrap().1 = slot;
        if is_loop {
            f.loop_depth += 1;
        }
        self.walk(stmts, frames);
        let f = frames.last_mut().unwrap();
        if is_loop {
            f.loop_depth -= 1;
        }
        f.path.last_mut().unwrap().1 = 0;
    }
}

/// True when the statement at `store` runs before the one at `load` on every path reaching `load`.
fn dominates(store: &Pos, load: &Pos) -> bool {
    let k = store.len() - 1;
    load.len() > k && load[..k] == store[..k] && load[k].0 > store[k].0
}

enum Promotion {
    Local(Reg),
    Module(ConstValue),
}

pub fn promote_single_assignment(p: &Program) -> Program {
    let mut c = Collector::default();
    for f in &p.functions {
        let mut frames = vec![Frame { scope: f.scope, path: Vec::new(), loop_depth: 0 }];
        c.walk(&f.body, &mut frames);
    }
    let module_entry = p.function(&p.entry).filter(|f| f.scope == MODULE_SCOPE && (f.name == MAIN || f.name == MODULE_BODY)).is_some();

    let mut chosen: BTreeMap<VarRef, Promotion> = BTreeMap::new();
    let mut namers: HashMap<String, Namer> = HashMap::new();
    let owner = owners(p);
    for (var, info) in &c.vars {
        let [(store, value)] = info.stores.as_slice() else { continue };
        let Some(spos) = &store.pos else { continue };
        if store.in_closure {
            continue;
        }
        let dominated = info.loads.iter().all(|l| match &l.pos {
            Some(lpos) => dominates(spos, lpos),
            None => var.scope == MODULE_SCOPE,
        });
        if !dominated {
            continue;
        }
        if var.scope == MODULE_SCOPE {
            if !module_entry || spos.len() != 1 {
                continue;
            }
            if c.entry_calls.iter().any(|cp| cp[0].0 < spos[0].0) {
                continue;
            }
            let cv = match value {
                Atom::Lit(l) => ConstValue::Lit(l.clone()),
                Atom::Reg(r) => match c.entry_consts.get(r) {
                    Some(cv @ (ConstValue::Lit(_) | ConstValue::Extern(_) | ConstValue::Func(_))) => cv.clone(),
                    _ => continue,
                },
            };
            chosen.insert(var.clone(), Promotion::Module(cv));
        } else {
            if store.in_loop && info.loads.iter().any(|l| l.in_closure) {
                continue;
            }
            let Some(top) = owner.get(&var.scope) else { continue };
            let f = p.function(top).unwrap();
            let namer = namers.entry(top.clone()).or_insert_with(|| Namer::for_function(f));
            chosen.insert(var.clone(), Promotion::Local(namer.fresh(&var.name)));
        }
    }

    let mut out = p.clone();
    out.globals.retain(|g| !chosen.contains_key(&VarRef::new(g.as_str(), MODULE_SCOPE)));
    for f in out.functions.iter_mut() {
        f.body = rewrite(std::mem::take(&mut f.body), &chosen);
    }
    out
}

/// Scope id → name of the top-level function containing it.
fn owners(p: &Program) -> HashMap<u32, String> {
    let mut out = HashMap::new();
    for f in &p.functions {
        out.insert(f.scope, f.name.clone());
        walk_stmts(&f.body, &mut |s| {
            if let Stmt::Closure { func, .. } = s {
                out.insert(func.scope, f.name.clone());
            }
        });
    }
    out
}

fn rewrite(stmts: Vec<Stmt>, chosen: &BTreeMap<VarRef, Promotion>) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for s in stmts {
        match s {
            Stmt::Declare { var } if chosen.contains_key(&var) => {}
            Stmt::Store { var, value } => match chosen.get(&var) {
                Some(Promotion::Local(r)) => out.push(Stmt::Copy { dest: r.clone(), src: value }),
                Some(Promotion::Module(_)) => {}
                None => out.push(Stmt::Store { var, value }),
            },
            Stmt::Load { dest, var } => match chosen.get(&var) {
                Some(Promotion::Local(r)) => out.push(Stmt::Copy { dest, src: Atom::Reg(r.clone()) }),
                Some(Promotion::Module(cv)) => out.push(Stmt::Const { dest, value: cv.clone() }),
                None => out.push(Stmt::Load { dest, var }),
            },
            Stmt::If { cond, mut then, mut orelse, outs } => {
                then.stmts = rewrite(then.stmts, chosen);
                orelse.stmts = rewrite(orelse.stmts, chosen);
                out.push(Stmt::If { cond, then, orelse, outs });
            }
            Stmt::ForEach { item, iter, carried, mut body, outs } => {
                body.stmts = rewrite(body.stmts, chosen);
                out.push(Stmt::ForEach { item, iter, carried, body, outs });
            }
            Stmt::While { carried, cond_block, cond, mut body, outs } => {
                let cond_block = rewrite(cond_block, chosen);
                body.stmts = rewrite(body.stmts, chosen);
                out.push(Stmt::While { carried, cond_block, cond, body, outs });
            }
            Stmt::Closure { dest, mut func } => {
                func.body = rewrite(std::mem::take(&mut func.body), chosen);
                out.push(Stmt::Closure { dest, func });
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezoar::text::print_program;

    fn compile(src: &str, entry: Option<&str>) -> Program {
        crate::bezoar::lower(&crate::frontend::parse_module(src).unwrap(), entry).unwrap()
    }

    fn var_ops(p: &Program, name: &str) -> usize {
        let mut n = 0;
        for f in &p.functions {
            walk_stmts(&f.body, &mut |s| match s {
                Stmt::Load { var, .. } | Stmt::Store { var, .. } if var.name == name => n += 1,
                _ => {}
            });
        }
        n
    }

    #[test]
    fn twice_stored_is_unchanged() {
        let p = compile("@poppy\ndef f(a):\n    b = a\n    b = a\n    return b\n", None);
        assert_eq!(var_ops(&promote_single_assignment(&p), "b"), 3);
    }

    #[test]
    fn store_in_branch_does_not_dominate() {
        let p = compile("@poppy\ndef f(a):\n    if a:\n        b = 1\n    return b\n", None);
        assert_eq!(var_ops(&promote_single_assignment(&p), "b"), 2);
    }

    #[test]
    fn single_store_before_loads_is_promoted() {
        let p = compile("@poppy\ndef f(a):\n    b = a\n    if a:\n        print(b)\n    return b\n", None);
        let q = promote_single_assignment(&p);
        assert_eq!(var_ops(&q, "b"), 0, "{}", print_program(&q));
        assert_eq!(var_ops(&q, "a"), 0);
    }

    #[test]
    fn module_constant_is_rematerialized() {
        let src = "K = 3\n@poppy\ndef f():\n    return add(K, 1)\n";
        let q = promote_single_assignment(&compile(src, Some("f")));
        assert_eq!(var_ops(&q, "K"), 0);
        assert!(print_program(&q).contains(":= const 3"));
        assert!(!q.globals.contains(&"K".to_string()));
    }

    #[test]
    fn module_var_after_call_stays() {
        let src = "print(1)\nK = 3\nprint(K)\n";
        let q = promote_single_assignment(&compile(src, None));
        assert_eq!(var_ops(&q, "K"), 2);
    }

    #[test]
    fn closure_in_loop_keeps_variable() {
        let src = "@poppy\ndef f(xs):\n    for x in xs:\n        v = x\n        def g():\n            return v\n        print(g())\n";
        let q = promote_single_assignment(&compile(src, None));
        assert!(var_ops(&q, "v") > 0);
    }
}
