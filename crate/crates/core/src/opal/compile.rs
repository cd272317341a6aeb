//! Bezoar → λ^O: memory and sequence threading, functionalized control flow.

use std::collections::{HashMap, HashSet};

use super::ir::{compute_captures, Binding, Def, Key, OpalProgram};
use crate::bezoar::ir::*;
use crate::error::CompileError;
use crate::frontend::Literal;
use crate::mutation_opt::Namer;

/// (threads M, threads S) of a statement list, not counting closure bodies.
fn needs(stmts: &[Stmt], flags: &HashMap<String, (bool, bool)>) -> (bool, bool) {
    let (mut m, mut s) = (false, false);
    fn go(stmts: &[Stmt], flags: &HashMap<String, (bool, bool)>, m: &mut bool, s: &mut bool) {
        for st in stmts {
            match st {
                Stmt::Load { .. } | Stmt::Store { .. } => *m = true,
                Stmt::Call { callee, .. } => match callee {
                    Callee::External(_) => *s = true,
                    Callee::Reg(_) => {
                        *m = true;
                        *s = true;
                    }
                    Callee::Func(f) => {
                        let (fm, fs) = flags.get(f).copied().unwrap_or((true, true));
                        *m |= fm;
                        *s |= fs;
                    }
                },
                Stmt::If { then, orelse, .. } => {
                    go(&then.stmts, flags, m, s);
                    go(&orelse.stmts, flags, m, s);
                }
                Stmt::ForEach { body, .. } => go(&body.stmts, flags, m, s),
                Stmt::While { cond_block, body, .. } => {
                    go(cond_block, flags, m, s);
                    go(&body.stmts, flags, m, s);
                }
                _ => {}
            }
        }
    }
    go(stmts, flags, &mut m, &mut s);
    (m, s)
}

/// Threading flags of every top-level function, as a fixpoint over direct calls.
pub fn threading_flags(p: &Program) -> HashMap<String, (bool, bool)> {
    let mut flags: HashMap<String, (bool, bool)> = p.functions.iter().map(|f| (f.name.clone(), (false, false))).collect();
    loop {
        let mut changed = false;
        for f in &p.functions {
            let n = needs(&f.body, &flags);
            if flags[&f.name] != n {
                flags.insert(f.name.clone(), n);
                changed = true;
            }
        }
        if !changed {
            return flags;
        }
    }
}

/// Scopes whose variables live in memory under a frame key.
fn frame_scopes(p: &Program) -> HashSet<u32> {
    let mut out = HashSet::new();
    for f in &p.functions {
        walk_stmts(&f.body, &mut |s| {
            if let Stmt::Load { var, .. } | Stmt::Store { var, .. } = s {
                if var.scope != MODULE_SCOPE {
                    out.insert(var.scope);
                }
            }
        });
    }
    out
}

fn frame_reg(scope: u32) -> Reg {
    format!("fr{scope}")
}

fn key(var: &VarRef) -> Key {
    Key { name: var.name.clone(), frame: (var.scope != MODULE_SCOPE).then(|| frame_reg(var.scope)) }
}

pub fn compile_to_opal(p: &Program) -> Result<OpalProgram, CompileError> {
    let flags = threading_flags(p);
    let scopes = frame_scopes(p);
    let top_names: HashSet<String> = p.functions.iter().map(|f| f.name.clone()).collect();
    let mut defs = Vec::new();
    for f in &p.functions {
        let mut fx = Fx {
            flags: &flags,
            scopes: &scopes,
            m_next: 0,
            s_next: 0,
            used_names: top_names.clone(),
            subst: HashMap::new(),
            namer: Namer::for_function(f),
        };
        defs.push(fx.function(f, f.name.clone(), flags[&f.name])?);
    }
    let mut out = OpalProgram { externals: p.externals.clone(), defs, entry: p.entry.clone() };
    compute_captures(&mut out);
    Ok(out)
}

#[derive(Clone)]
struct Cx {
    m: Option<Reg>,
    s: Option<Reg>,
}

struct Fx<'a> {
    flags: &'a HashMap<String, (bool, bool)>,
    scopes: &'a HashSet<u32>,
    m_next: u32,
    s_next: u32,
    used_names: HashSet<String>,
    subst: HashMap<Reg, Reg>,
    namer: Namer,
}

impl Fx<'_> {
    fn fresh_m(&mut self) -> Reg {
        let r = format!("M{}", self.m_next);
        self.m_next += 1;
        r
    }

    fn fresh_s(&mut self) -> Reg {
        let r = format!("S{}", self.s_next);
        self.s_next += 1;
        r
    }

    fn def_name(&mut self, base: &str) -> String {
        if self.used_names.insert(base.to_string()) {
            return base.to_string();
        }
        let mut k = 1;
        loop {
            let n = format!("{base}.{k}");
            if self.used_names.insert(n.clone()) {
                return n;
            }
            k += 1;
        }
    }

    fn fresh_reg(&mut self, like: &str) -> Reg {
        let base = match like.rfind('.') {
            Some(i) if like[i + 1..].chars().all(|c| c.is_ascii_digit()) => &like[..i],
            _ => like,
        };
        self.namer.fresh(base)
    }

    fn reg(&self, r: &Reg) -> Reg {
        let mut cur = r;
        while let Some(n) = self.subst.get(cur) {
            cur = n;
        }
        cur.clone()
    }

    fn atom(&self, a: &Atom) -> Atom {
        match a {
            Atom::Reg(r) => Atom::Reg(self.reg(r)),
            Atom::Lit(_) => a.clone(),
        }
    }

    fn atoms(&self, a: &[Atom]) -> Vec<Atom> {
        a.iter().map(|x| self.atom(x)).collect()
    }

    fn threaded(&self, cx: &Cx, tm: bool, ts: bool) -> Vec<Atom> {
        let mut out = Vec::new();
        if tm {
            out.push(Atom::Reg(cx.m.clone().expect("memory register")));
        }
        if ts {
            out.push(Atom::Reg(cx.s.clone().expect("sequence register")));
        }
        out
    }

    /// Compiles a user function (top-level or closure) into a def returning `[M'] [S'] value`.
    fn function(&mut self, f: &Function, name: String, (tm, ts): (bool, bool)) -> Result<Def, CompileError> {
        let mut params = Vec::new();
        let mut cx = Cx { m: None, s: None };
        if tm {
            let m = self.fresh_m();
            params.push(m.clone());
            cx.m = Some(m);
        }
        if ts {
            let s = self.fresh_s();
            params.push(s.clone());
            cx.s = Some(s);
        }
        params.extend(f.params.iter().cloned());
        let mut body = Vec::new();
        if self.scopes.contains(&f.scope) {
            body.push(Binding::Frame { dest: frame_reg(f.scope) });
        }
        self.block(&f.body, &mut cx, &mut body)?;
        let mut ret = self.threaded(&cx, tm, ts);
        ret.push(f.ret.as_ref().map(|a| self.atom(a)).unwrap_or(Atom::Lit(Literal::None)));
        Ok(Def { name, params, body, ret, threads_m: tm, threads_s: ts, captures: Vec::new(), returns_value: true })
    }

    fn need_m(cx: &Cx) -> Result<Reg, CompileError> {
        cx.m.clone().ok_or_else(|| CompileError::Internal("memory access without a memory register".into()))
    }

    fn need_s(cx: &Cx) -> Result<Reg, CompileError> {
        cx.s.clone().ok_or_else(|| CompileError::Internal("call without a sequence register".into()))
    }

    fn block(&mut self, stmts: &[Stmt], cx: &mut Cx, out: &mut Vec<Binding>) -> Result<(), CompileError> {
        for s in stmts {
            self.stmt(s, cx, out)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, cx: &mut Cx, out: &mut Vec<Binding>) -> Result<(), CompileError> {
        match s {
            Stmt::Declare { .. } => {}
            Stmt::Store { var, value } => {
                let mem = Self::need_m(cx)?;
                let dest_mem = self.fresh_m();
                out.push(Binding::Store { dest_mem: dest_mem.clone(), mem, key: key(var), value: self.atom(value) });
                cx.m = Some(dest_mem);
            }
            Stmt::Load { dest, var } => {
                out.push(Binding::Load { dest: dest.clone(), mem: Self::need_m(cx)?, key: key(var) });
            }
            Stmt::Const { dest, value } => out.push(Binding::Const { dest: dest.clone(), value: value.clone() }),
            Stmt::Copy { dest, src } => match src {
                Atom::Reg(r) => {
                    let r = self.reg(r);
                    self.subst.insert(dest.clone(), r);
                }
                Atom::Lit(l) => out.push(Binding::Const { dest: dest.clone(), value: ConstValue::Lit(l.clone()) }),
            },
            Stmt::CheckBound { dest, src, name } => {
                out.push(Binding::CheckBound { dest: dest.clone(), src: self.reg(src), name: name.clone() })
            }
            Stmt::Call { dest, callee, args } => {
                let args = self.atoms(args);
                match callee {
                    Callee::External(name) => {
                        let s_in = Self::need_s(cx)?;
                        let s_out = self.fresh_s();
                        out.push(Binding::ExtCall { s_out: s_out.clone(), dest: dest.clone(), name: name.clone(), s_in, args });
                        cx.s = Some(s_out);
                    }
                    Callee::Reg(r) => {
                        let (m_in, s_in) = (Self::need_m(cx)?, Self::need_s(cx)?);
                        let (m_out, s_out) = (self.fresh_m(), self.fresh_s());
                        out.push(Binding::Apply {
                            m_out: m_out.clone(),
                            s_out: s_out.clone(),
                            dest: dest.clone(),
                            callee: self.reg(r),
                            m_in,
                            s_in,
                            args,
                        });
                        cx.m = Some(m_out);
                        cx.s = Some(s_out);
                    }
                    Callee::Func(name) => {
                        let (fm, fs) = *self.flags.get(name).ok_or_else(|| CompileError::Internal(format!("unknown function `{name}`")))?;
                        let mut full = self.threaded(cx, fm, fs);
                        full.extend(args);
                        let mut outs = Vec::new();
                        if fm {
                            let m = self.fresh_m();
                            outs.push(m.clone());
                            cx.m = Some(m);
                        }
                        if fs {
                            let s = self.fresh_s();
                            outs.push(s.clone());
                            cx.s = Some(s);
                        }
                        outs.push(dest.clone());
                        out.push(Binding::Invoke { outs, func: name.clone(), args: full });
                    }
                }
            }
            Stmt::Closure { dest, func } => {
                let fl = needs(&func.body, self.flags);
                let name = self.def_name(&func.name);
                let def = self.function(func, name.clone(), fl)?;
                out.push(Binding::Def(Box::new(def)));
                out.push(Binding::Closure { dest: dest.clone(), func: name });
            }
            Stmt::If { cond, then, orelse, outs } => {
                let (m1, s1) = needs(&then.stmts, self.flags);
                let (m2, s2) = needs(&orelse.stmts, self.flags);
                let (tm, ts) = (m1 || m2, s1 || s2);
                let cond = self.reg(cond);
                let then_name = self.def_name("_then");
                let else_name = self.def_name("_else");
                let then_def = self.branch(then, then_name.clone(), cx, tm, ts)?;
                let else_def = self.branch(orelse, else_name.clone(), cx, tm, ts)?;
                out.push(Binding::Def(Box::new(then_def)));
                out.push(Binding::Def(Box::new(else_def)));
                let mut all = self.thread_outs(cx, tm, ts);
                all.extend(outs.iter().cloned());
                out.push(Binding::Ite { outs: all, cond, then: then_name, orelse: else_name });
            }
            Stmt::ForEach { item, iter, carried, body, outs } => {
                let (tm, ts) = needs(&body.stmts, self.flags);
                let name = self.def_name("_body");
                let mut params = vec![item.clone()];
                let mut inner = cx.clone();
                if tm {
                    let m = self.fresh_m();
                    params.push(m.clone());
                    inner.m = Some(m);
                }
                if ts {
                    let s = self.fresh_s();
                    params.push(s.clone());
                    inner.s = Some(s);
                }
                params.extend(carried.iter().map(|c| c.param.clone()));
                let mut b = Vec::new();
                self.block(&body.stmts, &mut inner, &mut b)?;
                let mut ret = self.threaded(&inner, tm, ts);
                ret.extend(self.atoms(&body.yields));
                out.push(Binding::Def(Box::new(Def {
                    name: name.clone(),
                    params,
                    body: b,
                    ret,
                    threads_m: tm,
                    threads_s: ts,
                    captures: Vec::new(),
                    returns_value: false,
                })));
                let mut init = self.threaded(cx, tm, ts);
                init.extend(carried.iter().map(|c| self.atom(&c.init)));
                let mut all = self.thread_outs(cx, tm, ts);
                all.extend(outs.iter().cloned());
                out.push(Binding::Fold { outs: all, list: self.reg(iter), init, body: name });
            }
            Stmt::While { carried, cond_block, cond, body, outs } => {
                let (m1, s1) = needs(cond_block, self.flags);
                let (m2, s2) = needs(&body.stmts, self.flags);
                let (tm, ts) = (m1 || m2, s1 || s2);
                let loop_name = self.def_name("_loop");
                let iter_name = self.def_name("_iter");
                let done_name = self.def_name("_done");

                let mut params = Vec::new();
                let mut inner = cx.clone();
                if tm {
                    let m = self.fresh_m();
                    params.push(m.clone());
                    inner.m = Some(m);
                }
                if ts {
                    let s = self.fresh_s();
                    params.push(s.clone());
                    inner.s = Some(s);
                }
                params.extend(carried.iter().map(|c| c.param.clone()));
                let mut lb = Vec::new();
                self.block(cond_block, &mut inner, &mut lb)?;
                let cond = self.reg(cond);
                let after_cond = inner.clone();

                let mut ib = Vec::new();
                self.block(&body.stmts, &mut inner, &mut ib)?;
                let mut rec_args = self.threaded(&inner, tm, ts);
                rec_args.extend(self.atoms(&body.yields));
                let mut rec_outs = self.thread_outs(&mut inner.clone(), tm, ts);
                rec_outs.extend(carried.iter().map(|c| self.fresh_reg(&c.param)));
                ib.push(Binding::Invoke { outs: rec_outs.clone(), func: loop_name.clone(), args: rec_args });
                let iter_def = Def {
                    name: iter_name.clone(),
                    params: vec![],
                    body: ib,
                    ret: rec_outs.into_iter().map(Atom::Reg).collect(),
                    threads_m: tm,
                    threads_s: ts,
                    captures: Vec::new(),
                    returns_value: false,
                };
                let mut done_ret = self.threaded(&after_cond, tm, ts);
                done_ret.extend(carried.iter().map(|c| Atom::Reg(c.param.clone())));
                let done_def = Def {
                    name: done_name.clone(),
                    params: vec![],
                    body: vec![],
                    ret: done_ret,
                    threads_m: tm,
                    threads_s: ts,
                    captures: Vec::new(),
                    returns_value: false,
                };
                lb.push(Binding::Def(Box::new(iter_def)));
                lb.push(Binding::Def(Box::new(done_def)));
                let mut ite_outs = self.thread_outs(&mut after_cond.clone(), tm, ts);
                ite_outs.extend(carried.iter().map(|c| self.fresh_reg(&c.param)));
                lb.push(Binding::Ite { outs: ite_outs.clone(), cond, then: iter_name, orelse: done_name });
                out.push(Binding::Def(Box::new(Def {
                    name: loop_name.clone(),
                    params,
                    body: lb,
                    ret: ite_outs.into_iter().map(Atom::Reg).collect(),
                    threads_m: tm,
                    threads_s: ts,
                    captures: Vec::new(),
                    returns_value: false,
                })));
                let mut init = self.threaded(cx, tm, ts);
                init.extend(carried.iter().map(|c| self.atom(&c.init)));
                let mut all = self.thread_outs(cx, tm, ts);
                all.extend(outs.iter().cloned());
                out.push(Binding::Invoke { outs: all, func: loop_name, args: init });
            }
        }
        Ok(())
    }

    /// Fresh output registers for the threaded state; updates `cx` to them.
    fn thread_outs(&mut self, cx: &mut Cx, tm: bool, ts: bool) -> Vec<Reg> {
        let mut out = Vec::new();
        if tm {
            let m = self.fresh_m();
            out.push(m.clone());
            cx.m = Some(m);
        }
        if ts {
            let s = self.fresh_s();
            out.push(s.clone());
            cx.s = Some(s);
        }
        out
    }

    fn branch(&mut self, b: &Block, name: String, cx: &Cx, tm: bool, ts: bool) -> Result<Def, CompileError> {
        let mut inner = cx.clone();
        let mut body = Vec::new();
        self.block(&b.stmts, &mut inner, &mut body)?;
        let mut ret = self.threaded(&inner, tm, ts);
        ret.extend(self.atoms(&b.yields));
        Ok(Def { name, params: vec![], body, ret, threads_m: tm, threads_s: ts, captures: Vec::new(), returns_value: false })
    }
}
