//! Variable-mutation optimizations on Bezoar: single-assignment promotion and
//! SSA promotion of function-local variables.

mod single_assign;
mod ssa;

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::bezoar::ir::*;
use crate::frontend::Literal;

pub use single_assign::promote_single_assignment;
pub use ssa::promote_locals;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarUsage {
    pub store_count: usize,
    pub load_count: usize,
    /// Accessed from a scope other than the declaring one, or module-global.
    pub escapes: bool,
}

/// Per-variable usage counts over the whole program.
pub fn summarize(p: &Program) -> BTreeMap<VarRef, VarUsage> {
    let mut out: BTreeMap<VarRef, VarUsage> = BTreeMap::new();
    fn walk(f: &Function, out: &mut BTreeMap<VarRef, VarUsage>) {
        walk_stmts(&f.body, &mut |s| match s {
            Stmt::Store { var, .. } | Stmt::Load { var, .. } | Stmt::Declare { var } => {
                let u = out.entry(var.clone()).or_default();
                match s {
                    Stmt::Store { .. } => u.store_count += 1,
                    Stmt::Load { .. } => u.load_count += 1,
                    _ => {}
                }
                if var.scope == MODULE_SCOPE {
                    u.escapes = true;
                }
            }
            _ => {}
        });
    }
    for f in &p.functions {
        walk(f, &mut out);
    }
    for (v, scope) in foreign_accesses(p) {
        if let Some(u) = out.get_mut(&VarRef::new(v, scope)) {
            u.escapes = true;
        }
    }
    out
}

/// Variables accessed from a function other than their declaring one.
fn foreign_accesses(p: &Program) -> HashSet<(String, u32)> {
    fn go(stmts: &[Stmt], scope: u32, out: &mut HashSet<(String, u32)>) {
        for s in stmts {
            match s {
                Stmt::Store { var, .. } | Stmt::Load { var, .. } if var.scope != scope => {
                    out.insert((var.name.clone(), var.scope));
                }
                Stmt::If { then, orelse, .. } => {
                    go(&then.stmts, scope, out);
                    go(&orelse.stmts, scope, out);
                }
                Stmt::ForEach { body, .. } => go(&body.stmts, scope, out),
                Stmt::While { cond_block, body, .. } => {
                    go(cond_block, scope, out);
                    go(&body.stmts, scope, out);
                }
                Stmt::Closure { func, .. } => go(&func.body, func.scope, out),
                _ => {}
            }
        }
    }
    let mut out = HashSet::new();
    for f in &p.functions {
        go(&f.body, f.scope, &mut out);
    }
    out
}

/// Runs both passes and folds calls through known function constants.
pub fn optimize(p: &Program) -> Program {
    let p = promote_single_assignment(p);
    let p = promote_locals(&p);
    fold_known_callees(&p)
}

/// Fresh `name.k` registers, unique within one top-level function.
pub(crate) struct Namer {
    used: HashSet<String>,
    next: HashMap<String, u32>,
}

impl Namer {
    pub fn for_function(f: &Function) -> Self {
        let mut used: HashSet<String> = f.params.iter().cloned().collect();
        fn collect(stmts: &[Stmt], used: &mut HashSet<String>) {
            walk_stmts(stmts, &mut |s| {
                used.extend(s.defs().into_iter().cloned());
                match s {
                    Stmt::ForEach { item, carried, .. } => {
                        used.insert(item.clone());
                        used.extend(carried.iter().map(|c| c.param.clone()));
                    }
                    Stmt::While { carried, .. } => used.extend(carried.iter().map(|c| c.param.clone())),
                    Stmt::Closure { func, .. } => used.extend(func.params.iter().cloned()),
                    _ => {}
                }
            });
        }
        collect(&f.body, &mut used);
        Namer { used, next: HashMap::new() }
    }

    pub fn fresh(&mut self, name: &str) -> Reg {
        let k = self.next.entry(name.to_string()).or_insert(1);
        loop {
            let r = format!("{name}.{k}");
            *k += 1;
            if self.used.insert(r.clone()) {
                return r;
            }
        }
    }

    /// `name.0` when free: the register holding the unbound sentinel.
    pub fn unbound(&mut self, name: &str) -> Reg {
        let r = format!("{name}.0");
        if self.used.insert(r.clone()) {
            r
        } else {
            self.fresh(name)
        }
    }
}

/// Turns calls whose callee register holds a known extern or function constant into direct calls.
///
/// A call through `getattr(x, "m")` becomes `callmethod(x, "m", ...)`, and the
/// `getattr` is dropped when nothing else reads its result.
pub fn fold_known_callees(p: &Program) -> Program {
    #[derive(Clone)]
    enum Known {
        Const(ConstValue),
        Method(Atom, String),
    }
    fn block(stmts: &mut [Stmt], known: &mut HashMap<Reg, Known>) {
        for s in stmts.iter_mut() {
            match s {
                Stmt::Const { dest, value: v @ (ConstValue::Extern(_) | ConstValue::Func(_)) } => {
                    known.insert(dest.clone(), Known::Const(v.clone()));
                }
                Stmt::Copy { dest, src: Atom::Reg(r) } => {
                    if let Some(v) = known.get(r).cloned() {
                        known.insert(dest.clone(), v);
                    }
                }
                Stmt::Call { dest, callee: Callee::External(n), args } if n == "getattr" => {
                    if let [recv, Atom::Lit(Literal::Str(attr))] = args.as_slice() {
                        known.insert(dest.clone(), Known::Method(recv.clone(), attr.clone()));
                    }
                }
                Stmt::Call { callee, args, .. } => {
                    if let Callee::Reg(r) = callee {
                        match known.get(r) {
                            Some(Known::Const(ConstValue::Extern(n))) => *callee = Callee::External(n.clone()),
                            Some(Known::Const(ConstValue::Func(n))) => *callee = Callee::Func(n.clone()),
                            Some(Known::Method(recv, attr)) => {
                                let mut all = vec![recv.clone(), Atom::Lit(Literal::Str(attr.clone()))];
                                all.append(args);
                                *args = all;
                                *callee = Callee::External(CALLMETHOD.into());
                            }
                            _ => {}
                        }
                    }
                }
                Stmt::If { then, orelse, .. } => {
                    block(&mut then.stmts, known);
                    block(&mut orelse.stmts, known);
                }
                Stmt::ForEach { body, .. } => block(&mut body.stmts, known),
                Stmt::While { cond_block, body, .. } => {
                    block(cond_block, known);
                    block(&mut body.stmts, known);
                }
                Stmt::Closure { func, .. } => block(&mut func.body, known),
                _ => {}
            }
        }
    }
    fn used_regs(f: &Function) -> HashSet<Reg> {
        let mut used: HashSet<Reg> = f.ret.iter().filter_map(Atom::reg).cloned().collect();
        fn yields(b: &Block, used: &mut HashSet<Reg>) {
            used.extend(b.yields.iter().filter_map(Atom::reg).cloned());
        }
        walk_stmts(&f.body, &mut |s| {
            used.extend(s.uses().into_iter().cloned());
            match s {
                Stmt::If { then, orelse, .. } => {
                    yields(then, &mut used);
                    yields(orelse, &mut used);
                }
                Stmt::ForEach { body, .. } | Stmt::While { body, .. } => yields(body, &mut used),
                Stmt::Closure { func, .. } => used.extend(func.ret.iter().filter_map(Atom::reg).cloned()),
                _ => {}
            }
        });
        used
    }
    fn prune(stmts: &mut Vec<Stmt>, used: &HashSet<Reg>) {
        stmts.retain(|s| {
            !matches!(s, Stmt::Call { dest, callee: Callee::External(n), args }
                if n == "getattr" && !used.contains(dest) && matches!(args.as_slice(), [_, Atom::Lit(Literal::Str(_))]))
        });
        for s in stmts.iter_mut() {
            match s {
                Stmt::If { then, orelse, .. } => {
                    prune(&mut then.stmts, used);
                    prune(&mut orelse.stmts, used);
                }
                Stmt::ForEach { body, .. } => prune(&mut body.stmts, used),
                Stmt::While { cond_block, body, .. } => {
                    prune(cond_block, used);
                    prune(&mut body.stmts, used);
                }
                Stmt::Closure { func, .. } => prune(&mut func.body, used),
                _ => {}
            }
        }
    }
    let mut out = p.clone();
    for f in out.functions.iter_mut() {
        block(&mut f.body, &mut HashMap::new());
        let used = used_regs(f);
        prune(&mut f.body, &used);
    }
    out
}

/// The external that calls a method on a receiver: `callmethod(obj, attr, args...)`.
pub const CALLMETHOD: &str = "callmethod";
