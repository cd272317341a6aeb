//! Sequential A-normal-form IR with explicit mutable variables.

use crate::control::Annotation;
use crate::frontend::Literal;

pub type Reg = String;

/// A mutable variable: its name and the id of the scope that declares it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef {
    pub name: String,
    pub scope: u32,
}

impl VarRef {
    pub fn new(name: impl Into<String>, scope: u32) -> Self {
        VarRef { name: name.into(), scope }
    }
}

pub const MODULE_SCOPE: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Reg(Reg),
    Lit(Literal),
}

impl Atom {
    pub fn reg(&self) -> Option<&Reg> {
        match self {
            Atom::Reg(r) => Some(r),
            Atom::Lit(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstValue {
    Lit(Literal),
    /// Sentinel read back as NameError.
    Unbound,
    /// Reference to an external or library function.
    Extern(String),
    /// Reference to a top-level internal function.
    Func(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    Reg(Reg),
    External(String),
    Func(String),
}

/// A loop-carried promoted variable: the register visible inside the loop and its initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct Carried {
    pub param: Reg,
    pub init: Atom,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Values flowing out to the enclosing construct's `outs`.
    pub yields: Vec<Atom>,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Block { stmts, yields: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Declare {
        var: VarRef,
    },
    Store {
        var: VarRef,
        value: Atom,
    },
    Load {
        dest: Reg,
        var: VarRef,
    },
    Const {
        dest: Reg,
        value: ConstValue,
    },
    Copy {
        dest: Reg,
        src: Atom,
    },
    Call {
        dest: Reg,
        callee: Callee,
        args: Vec<Atom>,
    },
    /// Loads a promoted variable that may still be unbound.
    CheckBound {
        dest: Reg,
        src: Reg,
        name: String,
    },
    Closure {
        dest: Reg,
        func: Box<Function>,
    },
    If {
        cond: Reg,
        then: Block,
        orelse: Block,
        outs: Vec<Reg>,
    },
    ForEach {
        item: Reg,
        iter: Reg,
        carried: Vec<Carried>,
        body: Block,
        outs: Vec<Reg>,
    },
    /// `cond` is computed by `cond_block` (which never stores) on each iteration.
    While {
        carried: Vec<Carried>,
        cond_block: Vec<Stmt>,
        cond: Reg,
        body: Block,
        outs: Vec<Reg>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Reg>,
    pub scope: u32,
    pub body: Vec<Stmt>,
    pub ret: Option<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternDecl {
    pub name: String,
    pub annotation: Annotation,
    pub is_async: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub externals: Vec<ExternDecl>,
    /// Variables of the module scope.
    pub globals: Vec<String>,
    pub functions: Vec<Function>,
    pub entry: String,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

impl Stmt {
    /// Registers defined directly by this statement (not inside nested blocks).
    pub fn defs(&self) -> Vec<&Reg> {
        match self {
            Stmt::Load { dest, .. }
            | Stmt::Const { dest, .. }
            | Stmt::Copy { dest, .. }
            | Stmt::Call { dest, .. }
            | Stmt::CheckBound { dest, .. }
            | Stmt::Closure { dest, .. } => vec![dest],
            Stmt::If { outs, .. } | Stmt::ForEach { outs, .. } | Stmt::While { outs, .. } => outs.iter().collect(),
            Stmt::Declare { .. } | Stmt::Store { .. } => vec![],
        }
    }

    /// Registers read directly by this statement (not inside nested blocks).
    pub fn uses(&self) -> Vec<&Reg> {
        let mut out = Vec::new();
        match self {
            Stmt::Store { value, .. } => out.extend(value.reg()),
            Stmt::Copy { src, .. } => out.extend(src.reg()),
            Stmt::Call { callee, args, .. } => {
                if let Callee::Reg(r) = callee {
                    out.push(r);
                }
                out.extend(args.iter().filter_map(Atom::reg));
            }
            Stmt::CheckBound { src, .. } => out.push(src),
            Stmt::If { cond, .. } => out.push(cond),
            Stmt::ForEach { iter, carried, .. } => {
                out.push(iter);
                out.extend(carried.iter().filter_map(|c| c.init.reg()));
            }
            Stmt::While { carried, .. } => out.extend(carried.iter().filter_map(|c| c.init.reg())),
            _ => {}
        }
        out
    }
}

/// Visits every statement, including those in nested blocks and closures.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match s {
            Stmt::If { then, orelse, .. } => {
                walk_stmts(&then.stmts, f);
                walk_stmts(&orelse.stmts, f);
            }
            Stmt::ForEach { body, .. } => walk_stmts(&body.stmts, f),
            Stmt::While { cond_block, body, .. } => {
                walk_stmts(cond_block, f);
                walk_stmts(&body.stmts, f);
            }
            Stmt::Closure { func, .. } => walk_stmts(&func.body, f),
            _ => {}
        }
    }
}

/// Counts the load and store statements of a function, nested blocks included.
pub fn count_memory_ops(func: &Function) -> usize {
    let mut n = 0;
    walk_stmts(&func.body, &mut |s| {
        if matches!(s, Stmt::Load { .. } | Stmt::Store { .. }) {
            n += 1;
        }
    });
    n
}
