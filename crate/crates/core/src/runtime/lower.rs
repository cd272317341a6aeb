//! Resolves registers to frame slots and definition names to indices.

use std::collections::HashMap;
use std::rc::Rc;

use crate::bezoar::ir::{Atom, ConstValue};
use crate::error::CompileError;
use crate::frontend::Literal;
use crate::opal::{Binding, Def, OpalProgram};
use crate::runtime::value::Value;

pub(crate) type Slot = usize;

#[derive(Debug, Clone)]
pub(crate) enum CAtom {
    Slot(Slot),
    Lit(Value),
}

/// A reference to a definition plus the current-frame slots feeding its captures.
#[derive(Debug, Clone)]
pub(crate) struct Target {
    pub def: usize,
    pub env: Vec<Slot>,
}

#[derive(Debug, Clone)]
pub(crate) enum CBind {
    Const { dest: Slot, value: Value },
    Func { dest: Slot, def: usize },
    Frame { dest: Slot },
    Load { dest: Slot, mem: Slot, name: Rc<str>, frame: Option<Slot> },
    Store { dest: Slot, mem: Slot, name: Rc<str>, frame: Option<Slot>, value: CAtom },
    Ext { s_out: Slot, dest: Slot, name: Rc<str>, s_in: Slot, args: Vec<CAtom> },
    Apply { m_out: Slot, s_out: Slot, dest: Slot, callee: Slot, m_in: Slot, s_in: Slot, args: Vec<CAtom> },
    Invoke { outs: Vec<Slot>, target: Target, args: Vec<CAtom> },
    Ite { outs: Vec<Slot>, cond: Slot, then: Target, orelse: Target },
    Fold { outs: Vec<Slot>, list: Slot, init: Vec<CAtom>, body: Target },
    CheckBound { dest: Slot, src: Slot, name: Rc<str> },
    Closure { dest: Slot, target: Target },
}

#[derive(Debug, Clone)]
pub(crate) struct CDef {
    pub name: Rc<str>,
    pub nslots: usize,
    pub params: Vec<Slot>,
    pub captures: Vec<Slot>,
    pub body: Vec<CBind>,
    pub ret: Vec<CAtom>,
    pub threads_m: bool,
    pub threads_s: bool,
    pub is_loop: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct CProgram {
    pub defs: Vec<CDef>,
    pub top: HashMap<String, usize>,
    pub ext_names: Vec<Rc<str>>,
}

pub(crate) fn literal_value(l: &Literal) -> Value {
    match l {
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Str(s) => Value::text(s.as_str()),
        Literal::Bool(b) => Value::Bool(*b),
        Literal::None | Literal::Ellipsis => Value::None,
    }
}

struct Lowerer {
    defs: Vec<Option<CDef>>,
    top: HashMap<String, usize>,
    ext_names: Vec<Rc<str>>,
}

/// Lexical environment: nested definitions visible at a point, innermost last.
type Scope<'a> = Vec<HashMap<&'a str, (usize, &'a Def)>>;

pub(crate) fn lower(p: &OpalProgram) -> Result<CProgram, CompileError> {
    let mut l = Lowerer { defs: Vec::new(), top: HashMap::new(), ext_names: Vec::new() };
    for d in &p.defs {
        let id = l.defs.len();
        l.defs.push(None);
        l.top.insert(d.name.clone(), id);
    }
    let top_defs: HashMap<&str, (usize, &Def)> = p.defs.iter().map(|d| (d.name.as_str(), (l.top[&d.name], d))).collect();
    let mut scope: Scope = vec![top_defs];
    for d in &p.defs {
        let id = l.top[&d.name];
        l.def(d, id, &mut scope)?;
    }
    let defs = l.defs.into_iter().map(|d| d.expect("every definition lowered")).collect();
    Ok(CProgram { defs, top: l.top, ext_names: l.ext_names })
}

impl Lowerer {
    fn def<'a>(&mut self, d: &'a Def, id: usize, scope: &mut Scope<'a>) -> Result<(), CompileError> {
        let mut slots: HashMap<&str, Slot> = HashMap::new();
        let mut next = 0;
        let mut slot_of = |r: &'a str, slots: &mut HashMap<&'a str, Slot>| -> Slot {
            *slots.entry(r).or_insert_with(|| {
                next += 1;
                next - 1
            })
        };
        let params: Vec<Slot> = d.params.iter().map(|r| slot_of(r, &mut slots)).collect();
        let captures: Vec<Slot> = d.captures.iter().map(|r| slot_of(r, &mut slots)).collect();
        for b in &d.body {
            for r in b.defs() {
                slot_of(r, &mut slots);
            }
        }
        // Nested definitions get ids up front so siblings can refer to each other.
        let mut nested = HashMap::new();
        for b in &d.body {
            if let Binding::Def(n) = b {
                let nid = self.defs.len();
                self.defs.push(None);
                nested.insert(n.name.as_str(), (nid, &**n));
            }
        }
        scope.push(nested.clone());
        let r = self.body(d, &slots, scope);
        let result = r.and_then(|body| {
            for (nid, n) in nested.values() {
                self.def(n, *nid, scope)?;
            }
            Ok(body)
        });
        scope.pop();
        let body = result?;
        let atom = |a: &Atom| -> Result<CAtom, CompileError> {
            Ok(match a {
                Atom::Reg(r) => CAtom::Slot(*slots.get(r.as_str()).ok_or_else(|| unbound(r, &d.name))?),
                Atom::Lit(l) => CAtom::Lit(literal_value(l)),
            })
        };
        let ret = d.ret.iter().map(atom).collect::<Result<_, _>>()?;
        self.defs[id] = Some(CDef {
            name: d.name.as_str().into(),
            nslots: slots.len(),
            params,
            captures,
            body,
            ret,
            threads_m: d.threads_m,
            threads_s: d.threads_s,
            is_loop: d.name.starts_with("_loop"),
        });
        Ok(())
    }

    fn body<'a>(&mut self, d: &'a Def, slots: &HashMap<&str, Slot>, scope: &Scope<'a>) -> Result<Vec<CBind>, CompileError> {
        let s = |r: &str| -> Result<Slot, CompileError> { slots.get(r).copied().ok_or_else(|| unbound(r, &d.name)) };
        let atom = |a: &Atom| -> Result<CAtom, CompileError> {
            Ok(match a {
                Atom::Reg(r) => CAtom::Slot(s(r)?),
                Atom::Lit(l) => CAtom::Lit(literal_value(l)),
            })
        };
        let atoms = |a: &[Atom]| a.iter().map(atom).collect::<Result<Vec<_>, _>>();
        let target = |name: &str| -> Result<Target, CompileError> {
            let (id, def) = scope
                .iter()
                .rev()
                .find_map(|m| m.get(name).copied())
                .ok_or_else(|| CompileError::Internal(format!("unknown definition `{name}` in `{}`", d.name)))?;
            let env = def.captures.iter().map(|r| s(r)).collect::<Result<Vec<_>, _>>()?;
            Ok(Target { def: id, env })
        };
        let outs = |o: &[String]| o.iter().map(|r| s(r)).collect::<Result<Vec<_>, _>>();
        let mut out = Vec::new();
        for b in &d.body {
            out.push(match b {
                Binding::Def(_) => continue,
                Binding::Const { dest, value } => match value {
                    ConstValue::Lit(l) => CBind::Const { dest: s(dest)?, value: literal_value(l) },
                    ConstValue::Unbound => CBind::Const { dest: s(dest)?, value: Value::Unbound },
                    ConstValue::Extern(n) => CBind::Const { dest: s(dest)?, value: Value::ext(n.as_str()) },
                    ConstValue::Func(n) => {
                        let def = *self.top.get(n).ok_or_else(|| CompileError::Internal(format!("unknown function `{n}`")))?;
                        CBind::Func { dest: s(dest)?, def }
                    }
                },
                Binding::Frame { dest } => CBind::Frame { dest: s(dest)? },
                Binding::Load { dest, mem, key } => CBind::Load {
                    dest: s(dest)?,
                    mem: s(mem)?,
                    name: key.name.as_str().into(),
                    frame: key.frame.as_deref().map(s).transpose()?,
                },
                Binding::Store { dest_mem, mem, key, value } => CBind::Store {
                    dest: s(dest_mem)?,
                    mem: s(mem)?,
                    name: key.name.as_str().into(),
                    frame: key.frame.as_deref().map(s).transpose()?,
                    value: atom(value)?,
                },
                Binding::ExtCall { s_out, dest, name, s_in, args } => {
                    let name: Rc<str> = name.as_str().into();
                    if !self.ext_names.contains(&name) {
                        self.ext_names.push(name.clone());
                    }
                    CBind::Ext { s_out: s(s_out)?, dest: s(dest)?, name, s_in: s(s_in)?, args: atoms(args)? }
                }
                Binding::Apply { m_out, s_out, dest, callee, m_in, s_in, args } => CBind::Apply {
                    m_out: s(m_out)?,
                    s_out: s(s_out)?,
                    dest: s(dest)?,
                    callee: s(callee)?,
                    m_in: s(m_in)?,
                    s_in: s(s_in)?,
                    args: atoms(args)?,
                },
                Binding::Invoke { outs: o, func, args } => CBind::Invoke { outs: outs(o)?, target: target(func)?, args: atoms(args)? },
                Binding::Ite { outs: o, cond, then, orelse } => {
                    CBind::Ite { outs: outs(o)?, cond: s(cond)?, then: target(then)?, orelse: target(orelse)? }
                }
                Binding::Fold { outs: o, list, init, body } => {
                    CBind::Fold { outs: outs(o)?, list: s(list)?, init: atoms(init)?, body: target(body)? }
                }
                Binding::CheckBound { dest, src, name } => CBind::CheckBound { dest: s(dest)?, src: s(src)?, name: name.as_str().into() },
                Binding::Closure { dest, func } => CBind::Closure { dest: s(dest)?, target: target(func)? },
            });
        }
        Ok(out)
    }
}

fn unbound(r: &str, def: &str) -> CompileError {
    CompileError::Internal(format!("register `{r}` has no definition in `{def}`"))
}
