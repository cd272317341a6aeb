//! A-normalization: flattens elaborated surface code into Bezoar statements.

use super::ir::*;
use super::scope::ScopeTable;
use crate::error::CompileError;
use crate::frontend::annotation_of;
use crate::frontend::ast::{Expr, ExprKind, Literal, Resolution, Stmt as SStmt, StmtKind, SurfaceFunction, SurfaceModule, TargetKind};

pub const MAIN: &str = "__main__";
pub const MODULE_BODY: &str = "__module__";

/// Lowers a desugared, scope-elaborated module. With an entry, module-level
/// code is reduced to its literal constant assignments and the entry is called
/// from a generated `__main__`; otherwise the module body becomes `__module__`.
pub fn a_normalize(m: &SurfaceModule, scopes: &ScopeTable, entry: Option<&str>) -> Result<Program, CompileError> {
    let mut externals = Vec::new();
    for f in m.external_functions() {
        externals.push(ExternDecl { name: f.name.clone(), annotation: annotation_of(f)?, is_async: f.is_async });
    }
    let mut functions = Vec::new();
    for f in m.internal_functions() {
        let mut l = Lower::new(scopes);
        functions.push(l.function(f)?);
    }
    let mut l = Lower::new(scopes);
    let mut body = Vec::new();
    for f in &m.functions {
        let r = l.fresh();
        let value = if f.is_internal() { ConstValue::Func(f.name.clone()) } else { ConstValue::Extern(f.name.clone()) };
        body.push(Stmt::Const { dest: r.clone(), value });
        body.push(Stmt::Store { var: VarRef::new(&f.name, MODULE_SCOPE), value: Atom::Reg(r) });
    }
    let main = match entry {
        Some(name) => {
            let target = m.function(name).filter(|f| f.is_internal()).ok_or_else(|| CompileError::UnknownEntry(name.to_string()))?;
            let params: Vec<Reg> = target.params.iter().map(|_| l.fresh()).collect();
            for s in &m.module_level_statements {
                if let StmtKind::Assign { target: t, value } = &s.kind {
                    if matches!(t.kind, TargetKind::Name(_)) && matches!(value.kind, ExprKind::Lit(_)) {
                        l.stmt(s, &mut body)?;
                    }
                }
            }
            let f = l.fresh();
            body.push(Stmt::Load { dest: f.clone(), var: VarRef::new(name, MODULE_SCOPE) });
            let r = l.fresh();
            body.push(Stmt::Call { dest: r.clone(), callee: Callee::Reg(f), args: params.iter().cloned().map(Atom::Reg).collect() });
            Function { name: MAIN.into(), params, scope: MODULE_SCOPE, body, ret: Some(Atom::Reg(r)) }
        }
        None => {
            l.block(&m.module_level_statements, &mut body)?;
            Function { name: MODULE_BODY.into(), params: Vec::new(), scope: MODULE_SCOPE, body, ret: None }
        }
    };
    let entry_name = main.name.clone();
    functions.push(main);
    Ok(Program { externals, globals: scopes.get(MODULE_SCOPE).declared.clone(), functions, entry: entry_name })
}

struct Lower<'a> {
    scopes: &'a ScopeTable,
    counter: u32,
}

fn internal(msg: &str) -> CompileError {
    CompileError::Internal(format!("a_normalize: {msg}"))
}

impl<'a> Lower<'a> {
    fn new(scopes: &'a ScopeTable) -> Self {
        Lower { scopes, counter: 0 }
    }

    fn fresh(&mut self) -> Reg {
        let r = format!("r{}", self.counter);
        self.counter += 1;
        r
    }

    fn function(&mut self, f: &SurfaceFunction) -> Result<Function, CompileError> {
        let scope = f.scope.ok_or_else(|| internal("function without scope"))?;
        let params: Vec<Reg> = f.params.iter().map(|_| self.fresh()).collect();
        let mut body = Vec::new();
        for name in &self.scopes.get(scope).declared {
            body.push(Stmt::Declare { var: VarRef::new(name, scope) });
        }
        for (p, r) in f.params.iter().zip(&params) {
            body.push(Stmt::Store { var: VarRef::new(&p.name, scope), value: Atom::Reg(r.clone()) });
        }
        let (stmts, ret) = match f.body.split_last() {
            Some((SStmt { kind: StmtKind::Return(e), .. }, rest)) => (rest, e.as_ref()),
            _ => (f.body.as_slice(), None),
        };
        self.block(stmts, &mut body)?;
        let ret = match ret {
            Some(e) => Some(self.expr(e, &mut body, false)?),
            None => None,
        };
        Ok(Function { name: f.name.clone(), params, scope, body, ret })
    }

    fn block(&mut self, stmts: &[SStmt], out: &mut Vec<Stmt>) -> Result<(), CompileError> {
        for s in stmts {
            self.stmt(s, out)?;
        }
        Ok(())
    }

    fn var_of(&self, target: &crate::frontend::ast::Target) -> Result<VarRef, CompileError> {
        match &target.kind {
            TargetKind::Name(n) => match n.resolved {
                Some(Resolution::Var(s)) => Ok(VarRef::new(&n.id, s)),
                _ => Err(internal("unresolved assignment target")),
            },
            _ => Err(internal("complex target survived desugaring")),
        }
    }

    fn stmt(&mut self, s: &SStmt, out: &mut Vec<Stmt>) -> Result<(), CompileError> {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let var = self.var_of(target)?;
                let v = self.expr(value, out, false)?;
                out.push(Stmt::Store { var, value: v });
            }
            StmtKind::Expr(e) => {
                if !matches!(e.kind, ExprKind::Lit(_)) {
                    self.expr(e, out, false)?;
                }
            }
            StmtKind::If { cond, then, orelse } => {
                let c = self.expr_reg(cond, out)?;
                let mut t = Vec::new();
                self.block(then, &mut t)?;
                let mut e = Vec::new();
                self.block(orelse, &mut e)?;
                out.push(Stmt::If { cond: c, then: Block::new(t), orelse: Block::new(e), outs: Vec::new() });
            }
            StmtKind::For { target, iter, body } => {
                let it = self.expr_reg(iter, out)?;
                let item = self.fresh();
                let var = self.var_of(target)?;
                let mut b = vec![Stmt::Store { var, value: Atom::Reg(item.clone()) }];
                self.block(body, &mut b)?;
                out.push(Stmt::ForEach { item, iter: it, carried: Vec::new(), body: Block::new(b), outs: Vec::new() });
            }
            StmtKind::While { cond, body } => {
                let mut cond_block = Vec::new();
                let c = self.expr_reg(cond, &mut cond_block)?;
                let mut b = Vec::new();
                self.block(body, &mut b)?;
                out.push(Stmt::While { carried: Vec::new(), cond_block, cond: c, body: Block::new(b), outs: Vec::new() });
            }
            StmtKind::FunctionDef(f) => {
                let scope = f.scope.ok_or_else(|| internal("nested function without scope"))?;
                let parent = self.scopes.get(scope).parent.unwrap_or(MODULE_SCOPE);
                let func = self.function(f)?;
                let r = self.fresh();
                out.push(Stmt::Closure { dest: r.clone(), func: Box::new(func) });
                out.push(Stmt::Store { var: VarRef::new(&f.name, parent), value: Atom::Reg(r) });
            }
            StmtKind::Pass => {}
            StmtKind::Return(_) => return Err(internal("return in non-final position")),
            StmtKind::AugAssign { .. } => return Err(internal("augmented assignment survived desugaring")),
        }
        Ok(())
    }

    fn expr_reg(&mut self, e: &Expr, out: &mut Vec<Stmt>) -> Result<Reg, CompileError> {
        match self.expr(e, out, false)? {
            Atom::Reg(r) => Ok(r),
            Atom::Lit(_) => Err(internal("literal in register position")),
        }
    }

    /// Literals stay inline only as call arguments.
    fn expr(&mut self, e: &Expr, out: &mut Vec<Stmt>, arg_pos: bool) -> Result<Atom, CompileError> {
        match &e.kind {
            ExprKind::Lit(l) => {
                let l = if matches!(l, Literal::Ellipsis) { Literal::None } else { l.clone() };
                if arg_pos {
                    return Ok(Atom::Lit(l));
                }
                let r = self.fresh();
                out.push(Stmt::Const { dest: r.clone(), value: ConstValue::Lit(l) });
                Ok(Atom::Reg(r))
            }
            ExprKind::Name(n) => {
                let r = self.fresh();
                match n.resolved {
                    Some(Resolution::Var(s)) => out.push(Stmt::Load { dest: r.clone(), var: VarRef::new(&n.id, s) }),
                    Some(Resolution::Builtin) => out.push(Stmt::Const { dest: r.clone(), value: ConstValue::Extern(n.id.clone()) }),
                    None => return Err(internal("unresolved name")),
                }
                Ok(Atom::Reg(r))
            }
            ExprKind::Builtin(b) => {
                let r = self.fresh();
                out.push(Stmt::Const { dest: r.clone(), value: ConstValue::Extern(b.clone()) });
                Ok(Atom::Reg(r))
            }
            ExprKind::Call { func, args } => {
                let callee = match &func.kind {
                    ExprKind::Builtin(b) => Callee::External(b.clone()),
                    ExprKind::Name(n) if n.resolved == Some(Resolution::Builtin) => Callee::External(n.id.clone()),
                    _ => Callee::Reg(self.expr_reg(func, out)?),
                };
                let mut atoms = Vec::with_capacity(args.len());
                for a in args {
                    atoms.push(self.expr(a, out, true)?);
                }
                let r = self.fresh();
                out.push(Stmt::Call { dest: r.clone(), callee, args: atoms });
                Ok(Atom::Reg(r))
            }
            _ => Err(internal("compound expression survived desugaring")),
        }
    }
}
