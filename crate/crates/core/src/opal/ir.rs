//! λ^O: function definitions and calls over immutable registers, with
//! explicit memory (`M`) and sequence (`S`) registers.

use crate::bezoar::ir::{Atom, ConstValue, ExternDecl, Reg};

/// Memory key: a variable name, scoped to a frame register for function locals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Key {
    pub name: String,
    pub frame: Option<Reg>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Const {
        dest: Reg,
        value: ConstValue,
    },
    /// Allocates a fresh frame id for the memory keys of one invocation.
    Frame {
        dest: Reg,
    },
    Load {
        dest: Reg,
        mem: Reg,
        key: Key,
    },
    Store {
        dest_mem: Reg,
        mem: Reg,
        key: Key,
        value: Atom,
    },
    /// `S', r := name(S, args...)`.
    ExtCall {
        s_out: Reg,
        dest: Reg,
        name: String,
        s_in: Reg,
        args: Vec<Atom>,
    },
    /// `M', S', r := apply(f, M, S, args...)` on a runtime function value.
    Apply {
        m_out: Reg,
        s_out: Reg,
        dest: Reg,
        callee: Reg,
        m_in: Reg,
        s_in: Reg,
        args: Vec<Atom>,
    },
    /// Direct call of a named definition.
    Invoke {
        outs: Vec<Reg>,
        func: String,
        args: Vec<Atom>,
    },
    Ite {
        outs: Vec<Reg>,
        cond: Reg,
        then: String,
        orelse: String,
    },
    Fold {
        outs: Vec<Reg>,
        list: Reg,
        init: Vec<Atom>,
        body: String,
    },
    CheckBound {
        dest: Reg,
        src: Reg,
        name: String,
    },
    /// A function value closing over the current registers.
    Closure {
        dest: Reg,
        func: String,
    },
    Def(Box<Def>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Def {
    pub name: String,
    pub params: Vec<Reg>,
    pub body: Vec<Binding>,
    pub ret: Vec<Atom>,
    pub threads_m: bool,
    pub threads_s: bool,
    /// Free registers, filled in by `compute_captures`.
    pub captures: Vec<Reg>,
    /// True for compiled user functions (which return a value after the threaded registers).
    pub returns_value: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpalProgram {
    pub externals: Vec<ExternDecl>,
    pub defs: Vec<Def>,
    pub entry: String,
}

impl OpalProgram {
    pub fn def(&self, name: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.name == name)
    }
}

impl Binding {
    pub fn defs(&self) -> Vec<&Reg> {
        match self {
            Binding::Const { dest, .. }
            | Binding::Frame { dest }
            | Binding::Load { dest, .. }
            | Binding::CheckBound { dest, .. }
            | Binding::Closure { dest, .. } => vec![dest],
            Binding::Store { dest_mem, .. } => vec![dest_mem],
            Binding::ExtCall { s_out, dest, .. } => vec![s_out, dest],
            Binding::Apply { m_out, s_out, dest, .. } => vec![m_out, s_out, dest],
            Binding::Invoke { outs, .. } | Binding::Ite { outs, .. } | Binding::Fold { outs, .. } => outs.iter().collect(),
            Binding::Def(_) => vec![],
        }
    }

    pub fn uses(&self) -> Vec<&Reg> {
        fn regs(a: &[Atom]) -> impl Iterator<Item = &Reg> {
            a.iter().filter_map(Atom::reg)
        }
        let mut out = Vec::new();
        match self {
            Binding::Const { .. } | Binding::Frame { .. } | Binding::Closure { .. } | Binding::Def(_) => {}
            Binding::Load { mem, key, .. } => {
                out.push(mem);
                out.extend(key.frame.as_ref());
            }
            Binding::Store { mem, key, value, .. } => {
                out.push(mem);
                out.extend(key.frame.as_ref());
                out.extend(value.reg());
            }
            Binding::ExtCall { s_in, args, .. } => {
                out.push(s_in);
                out.extend(regs(args));
            }
            Binding::Apply { callee, m_in, s_in, args, .. } => {
                out.extend([callee, m_in, s_in]);
                out.extend(regs(args));
            }
            Binding::Invoke { args, .. } => out.extend(regs(args)),
            Binding::Ite { cond, .. } => out.push(cond),
            Binding::Fold { list, init, .. } => {
                out.push(list);
                out.extend(regs(init));
            }
            Binding::CheckBound { src, .. } => out.push(src),
        }
        out
    }

    /// Names of definitions this binding refers to.
    pub fn def_refs(&self) -> Vec<&str> {
        match self {
            Binding::Invoke { func, .. } | Binding::Closure { func, .. } => vec![func],
            Binding::Ite { then, orelse, .. } => vec![then, orelse],
            Binding::Fold { body, .. } => vec![body],
            _ => vec![],
        }
    }
}

/// Visits every definition, nested ones included.
pub fn walk_defs<'a>(defs: &'a [Def], f: &mut dyn FnMut(&'a Def)) {
    for d in defs {
        f(d);
        let nested: Vec<&Def> = d
            .body
            .iter()
            .filter_map(|b| match b {
                Binding::Def(n) => Some(&**n),
                _ => None,
            })
            .collect();
        for n in nested {
            walk_defs(std::slice::from_ref(n), f);
        }
    }
}

/// Fills `captures` of every definition with its free registers. A definition
/// also captures what the nested definitions it refers to by name need.
pub fn compute_captures(p: &mut OpalProgram) {
    use std::collections::{BTreeMap, BTreeSet};

    // Free registers of each nested def, ignoring references to other defs.
    fn local_free(d: &Def, out: &mut BTreeMap<String, BTreeSet<Reg>>) -> BTreeSet<Reg> {
        let mut defined: BTreeSet<Reg> = d.params.iter().cloned().collect();
        let mut free = BTreeSet::new();
        for b in &d.body {
            for u in b.uses() {
                if !defined.contains(u) {
                    free.insert(u.clone());
                }
            }
            if let Binding::Def(n) = b {
                for r in local_free(n, out) {
                    if !defined.contains(&r) {
                        free.insert(r);
                    }
                }
            }
            defined.extend(b.defs().into_iter().cloned());
        }
        for a in &d.ret {
            if let Some(r) = a.reg() {
                if !defined.contains(r) {
                    free.insert(r.clone());
                }
            }
        }
        out.insert(d.name.clone(), free.clone());
        free
    }

    fn defined_in(d: &Def) -> BTreeSet<Reg> {
        let mut s: BTreeSet<Reg> = d.params.iter().cloned().collect();
        for b in &d.body {
            s.extend(b.defs().into_iter().cloned());
        }
        s
    }

    for top in p.defs.iter_mut() {
        let mut free: BTreeMap<String, BTreeSet<Reg>> = BTreeMap::new();
        local_free(top, &mut free);
        let mut refs: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut defined: BTreeMap<String, BTreeSet<Reg>> = BTreeMap::new();
        let mut nested_in: BTreeMap<String, Vec<String>> = BTreeMap::new();
        walk_defs(std::slice::from_ref(top), &mut |d| {
            let mut r = Vec::new();
            for b in &d.body {
                r.extend(b.def_refs().into_iter().map(String::from));
                if let Binding::Def(n) = b {
                    nested_in.entry(d.name.clone()).or_default().push(n.name.clone());
                }
            }
            refs.insert(d.name.clone(), r);
            defined.insert(d.name.clone(), defined_in(d));
        });
        // Fixpoint: free(d) ⊇ (free(ref) ∪ free(nested)) − defined(d).
        loop {
            let mut changed = false;
            for name in refs.keys().cloned().collect::<Vec<_>>() {
                let mut add = BTreeSet::new();
                for r in refs[&name].iter().chain(nested_in.get(&name).into_iter().flatten()) {
                    if let Some(f) = free.get(r) {
                        for reg in f {
                            if !defined[&name].contains(reg) && !free[&name].contains(reg) {
                                add.insert(reg.clone());
                            }
                        }
                    }
                }
                if !add.is_empty() {
                    free.get_mut(&name).unwrap().extend(add);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        fn assign(d: &mut Def, free: &BTreeMap<String, BTreeSet<Reg>>, top: bool) {
            d.captures = if top { Vec::new() } else { free[&d.name].iter().cloned().collect() };
            for b in d.body.iter_mut() {
                if let Binding::Def(n) = b {
                    assign(n, free, false);
                }
            }
        }
        assign(top, &free, true);
    }
}
