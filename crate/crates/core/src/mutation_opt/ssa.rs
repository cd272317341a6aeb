//! SSA promotion of non-escaping function locals. Promoted variables are
//! threaded through branches and loops as yields, carried registers and outs.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::Namer;
use crate::bezoar::ir::*;

pub fn promote_locals(p: &Program) -> Program {
    let mut out = p.clone();
    let foreign = super::foreign_accesses(p);
    for f in out.functions.iter_mut() {
        if f.scope == MODULE_SCOPE {
            continue;
        }
        let mut namer = Namer::for_function(f);
        promote_function(f, &foreign, &mut namer);
    }
    out
}

fn promote_function(f: &mut Function, foreign: &HashSet<(String, u32)>, namer: &mut Namer) {
    let scope = f.scope;
    let mut declared = Vec::new();
    let mut excluded = BTreeSet::new();
    collect(&f.body, scope, &mut declared, &mut excluded, false);
    let promoted: Vec<String> = declared.into_iter().filter(|n| !excluded.contains(n) && !foreign.contains(&(n.clone(), scope))).collect();
    let order = first_store_order(&f.body, scope, &promoted);
    let mut ssa = Ssa { scope, promoted: promoted.iter().cloned().collect(), order, namer, foreign };
    let mut env = Env::default();
    let body = std::mem::take(&mut f.body);
    f.body = ssa.block(body, &mut env);
    drop_unused_unbound(&mut f.body, f.ret.as_ref());
}

/// Declared names of `scope`, and those stored inside a while condition.
fn collect(stmts: &[Stmt], scope: u32, declared: &mut Vec<String>, excluded: &mut BTreeSet<String>, in_cond: bool) {
    for s in stmts {
        match s {
            Stmt::Declare { var } if var.scope == scope && !declared.contains(&var.name) => declared.push(var.name.clone()),
            Stmt::Store { var, .. } if in_cond && var.scope == scope => {
                excluded.insert(var.name.clone());
            }
            Stmt::If { then, orelse, .. } => {
                collect(&then.stmts, scope, declared, excluded, in_cond);
                collect(&orelse.stmts, scope, declared, excluded, in_cond);
            }
            Stmt::ForEach { body, .. } => collect(&body.stmts, scope, declared, excluded, in_cond),
            Stmt::While { cond_block, body, .. } => {
                collect(cond_block, scope, declared, excluded, true);
                collect(&body.stmts, scope, declared, excluded, in_cond);
            }
            _ => {}
        }
    }
}

fn first_store_order(stmts: &[Stmt], scope: u32, promoted: &[String]) -> BTreeMap<String, usize> {
    let mut order = BTreeMap::new();
    walk_stmts(stmts, &mut |s| {
        if let Stmt::Store { var, .. } = s {
            if var.scope == scope && promoted.contains(&var.name) && !order.contains_key(&var.name) {
                let n = order.len();
                order.insert(var.name.clone(), n);
            }
        }
    });
    order
}

#[derive(Debug, Clone, Default)]
struct Env {
    cur: BTreeMap<String, Reg>,
    bound: BTreeSet<String>,
}

struct Ssa<'a> {
    scope: u32,
    promoted: BTreeSet<String>,
    order: BTreeMap<String, usize>,
    namer: &'a mut Namer,
    foreign: &'a HashSet<(String, u32)>,
}

impl Ssa<'_> {
    fn mine(&self, var: &VarRef) -> bool {
        var.scope == self.scope && self.promoted.contains(&var.name)
    }

    /// Promoted variables stored in `stmts`, in first-store order.
    fn stored_in(&self, stmts: &[Stmt]) -> Vec<String> {
        let mut set = BTreeSet::new();
        fn go(ssa: &Ssa, stmts: &[Stmt], set: &mut BTreeSet<String>) {
            for s in stmts {
                match s {
                    Stmt::Store { var, .. } if ssa.mine(var) => {
                        set.insert(var.name.clone());
                    }
                    Stmt::If { then, orelse, .. } => {
                        go(ssa, &then.stmts, set);
                        go(ssa, &orelse.stmts, set);
                    }
                    Stmt::ForEach { body, .. } => go(ssa, &body.stmts, set),
                    Stmt::While { cond_block, body, .. } => {
                        go(ssa, cond_block, set);
                        go(ssa, &body.stmts, set);
                    }
                    _ => {}
                }
            }
        }
        go(self, stmts, &mut set);
        let mut v: Vec<String> = set.into_iter().collect();
        v.sort_by_key(|n| self.order.get(n).copied().unwrap_or(usize::MAX));
        v
    }

    fn block(&mut self, stmts: Vec<Stmt>, env: &mut Env) -> Vec<Stmt> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            match s {
                Stmt::Declare { var } if self.mine(&var) => {
                    let r = self.namer.unbound(&var.name);
                    out.push(Stmt::Const { dest: r.clone(), value: ConstValue::Unbound });
                    env.cur.insert(var.name.clone(), r);
                    env.bound.remove(&var.name);
                }
                Stmt::Store { var, value } if self.mine(&var) => {
                    let r = self.namer.fresh(&var.name);
                    out.push(Stmt::Copy { dest: r.clone(), src: value });
                    env.cur.insert(var.name.clone(), r);
                    env.bound.insert(var.name);
                }
                Stmt::Load { dest, var } if self.mine(&var) => {
                    let src = env.cur[&var.name].clone();
                    if env.bound.contains(&var.name) {
                        out.push(Stmt::Copy { dest, src: Atom::Reg(src) });
                    } else {
                        out.push(Stmt::CheckBound { dest, src, name: var.name.clone() });
                        env.bound.insert(var.name);
                    }
                }
                Stmt::If { cond, mut then, mut orelse, mut outs } => {
                    let mut vars = self.stored_in(&then.stmts);
                    for v in self.stored_in(&orelse.stmts) {
                        if !vars.contains(&v) {
                            vars.push(v);
                        }
                    }
                    vars.sort_by_key(|n| self.order.get(n).copied().unwrap_or(usize::MAX));
                    let mut e1 = env.clone();
                    then.stmts = self.block(then.stmts, &mut e1);
                    let mut e2 = env.clone();
                    orelse.stmts = self.block(orelse.stmts, &mut e2);
                    for v in &vars {
                        then.yields.push(Atom::Reg(e1.cur[v].clone()));
                        orelse.yields.push(Atom::Reg(e2.cur[v].clone()));
                        let o = self.namer.fresh(v);
                        outs.push(o.clone());
                        env.cur.insert(v.clone(), o);
                    }
                    env.bound = e1.bound.intersection(&e2.bound).cloned().collect();
                    out.push(Stmt::If { cond, then, orelse, outs });
                }
                Stmt::ForEach { item, iter, mut carried, mut body, mut outs } => {
                    let vars = self.stored_in(&body.stmts);
                    let mut inner = env.clone();
                    for v in &vars {
                        let p = self.namer.fresh(v);
                        carried.push(Carried { param: p.clone(), init: Atom::Reg(env.cur[v].clone()) });
                        inner.cur.insert(v.clone(), p);
                    }
                    body.stmts = self.block(body.stmts, &mut inner);
                    for v in &vars {
                        body.yields.push(Atom::Reg(inner.cur[v].clone()));
                        let o = self.namer.fresh(v);
                        outs.push(o.clone());
                        env.cur.insert(v.clone(), o);
                    }
                    out.push(Stmt::ForEach { item, iter, carried, body, outs });
                }
                Stmt::While { mut carried, cond_block, cond, mut body, mut outs } => {
                    let vars = self.stored_in(&body.stmts);
                    let mut inner = env.clone();
                    for v in &vars {
                        let p = self.namer.fresh(v);
                        carried.push(Carried { param: p.clone(), init: Atom::Reg(env.cur[v].clone()) });
                        inner.cur.insert(v.clone(), p);
                    }
                    let cond_block = self.block(cond_block, &mut inner);
                    body.stmts = self.block(body.stmts, &mut inner);
                    for v in &vars {
                        body.yields.push(Atom::Reg(inner.cur[v].clone()));
                    }
                    for v in &vars {
                        let o = self.namer.fresh(v);
                        outs.push(o.clone());
                        env.cur.insert(v.clone(), o);
                    }
                    out.push(Stmt::While { carried, cond_block, cond, body, outs });
                }
                Stmt::Closure { dest, mut func } => {
                    promote_function(&mut func, self.foreign, self.namer);
                    out.push(Stmt::Closure { dest, func });
                }
                other => out.push(other),
            }
        }
        out
    }
}

/// Removes `const unbound` bindings that nothing reads.
fn drop_unused_unbound(body: &mut Vec<Stmt>, ret: Option<&Atom>) {
    let mut used: HashSet<Reg> = HashSet::new();
    fn uses(stmts: &[Stmt], used: &mut HashSet<Reg>) {
        walk_stmts(stmts, &mut |s| {
            used.extend(s.uses().into_iter().cloned());
            match s {
                Stmt::If { then, orelse, .. } => {
                    used.extend(then.yields.iter().chain(&orelse.yields).filter_map(Atom::reg).cloned());
                }
                Stmt::ForEach { body, .. } | Stmt::While { body, .. } => used.extend(body.yields.iter().filter_map(Atom::reg).cloned()),
                Stmt::Closure { func, .. } => used.extend(func.ret.iter().filter_map(Atom::reg).cloned()),
                _ => {}
            }
            if let Stmt::While { cond, .. } = s {
                used.insert(cond.clone());
            }
        });
    }
    uses(body, &mut used);
    used.extend(ret.and_then(Atom::reg).cloned());
    body.retain(|s| !matches!(s, Stmt::Const { dest, value: ConstValue::Unbound } if !used.contains(dest)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezoar::text::{parse_program, print_program};

    #[test]
    fn branch_join_threads_outs() {
        let p =
            parse_program("def f(c, a, b):\n    declare x\n    store x a\n    if c:\n        store x b\n    r1 := load x\n    return r1\n")
                .unwrap();
        let text = print_program(&promote_locals(&p));
        assert!(text.contains("if c -> x.3:"), "{text}");
        assert!(text.contains("yield x.2"), "{text}");
        assert!(text.contains("yield x.1"), "{text}");
        assert!(text.contains("r1 := x.3"), "{text}");
    }

    #[test]
    fn maybe_unbound_load_is_checked() {
        let p = parse_program("def f(c, a):\n    declare x\n    if c:\n        store x a\n    r1 := load x\n    return r1\n").unwrap();
        let text = print_program(&promote_locals(&p));
        assert!(text.contains("x.0 := const unbound"), "{text}");
        assert!(text.contains("r1 := checkbound(x.2, \"x\")"), "{text}");
    }

    #[test]
    fn loop_carries_variable() {
        let p = parse_program(
            "def f(xs):\n    declare n\n    r0 := const 0\n    store n r0\n    for r1 in xs:\n        r2 := load n\n        r3 := add(r2, 1)\n        store n r3\n    r4 := load n\n    return r4\n",
        )
        .unwrap();
        let text = print_program(&promote_locals(&p));
        assert!(text.contains("for r1 in xs with (n.2 = n.1) -> n.4:"), "{text}");
        assert!(text.contains("yield n.3"), "{text}");
    }
}
