//! Python-style scope elaboration: every name use is resolved to a declaring scope.

use std::collections::BTreeSet;

use super::ir::MODULE_SCOPE;
use crate::error::CompileError;
use crate::frontend::ast::*;
use crate::library;

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeInfo {
    pub id: u32,
    pub name: String,
    pub parent: Option<u32>,
    /// Declared variables, parameters first, then in first-assignment order.
    pub declared: Vec<String>,
    /// Names read from enclosing function scopes, with the declaring scope.
    pub captured: Vec<(String, u32)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScopeTable {
    pub scopes: Vec<ScopeInfo>,
}

impl ScopeTable {
    pub fn get(&self, id: u32) -> &ScopeInfo {
        &self.scopes[id as usize]
    }

    pub fn declares(&self, id: u32, name: &str) -> bool {
        self.get(id).declared.iter().any(|n| n == name)
    }
}

pub fn elaborate_scopes(m: &SurfaceModule) -> Result<(SurfaceModule, ScopeTable), CompileError> {
    let mut table = ScopeTable::default();
    let mut module_decls = Vec::new();
    for f in &m.functions {
        push_unique(&mut module_decls, &f.name);
    }
    collect_assigned(&m.module_level_statements, &mut module_decls);
    table.scopes.push(ScopeInfo { id: MODULE_SCOPE, name: "<module>".into(), parent: None, declared: module_decls, captured: Vec::new() });
    let mut out = m.clone();
    let mut chain = vec![MODULE_SCOPE];
    for f in out.functions.iter_mut() {
        if f.is_internal() {
            elaborate_function(f, &mut table, &mut chain)?;
        }
    }
    resolve_block(&mut out.module_level_statements, &mut table, &mut chain)?;
    Ok((out, table))
}

fn push_unique(v: &mut Vec<String>, name: &str) {
    if !v.iter().any(|n| n == name) {
        v.push(name.to_string());
    }
}

/// Names bound by assignment in `stmts`, not descending into nested functions.
fn collect_assigned(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { target, .. } | StmtKind::AugAssign { target, .. } => collect_target(target, out),
            StmtKind::For { target, body, .. } => {
                collect_target(target, out);
                collect_assigned(body, out);
            }
            StmtKind::If { then, orelse, .. } => {
                collect_assigned(then, out);
                collect_assigned(orelse, out);
            }
            StmtKind::While { body, .. } => collect_assigned(body, out),
            StmtKind::FunctionDef(f) => push_unique(out, &f.name),
            _ => {}
        }
    }
}

fn collect_target(t: &Target, out: &mut Vec<String>) {
    match &t.kind {
        TargetKind::Name(n) => push_unique(out, &n.id),
        TargetKind::Tuple(items) => items.iter().for_each(|i| collect_target(i, out)),
        _ => {}
    }
}

fn elaborate_function(f: &mut SurfaceFunction, table: &mut ScopeTable, chain: &mut Vec<u32>) -> Result<(), CompileError> {
    let id = table.scopes.len() as u32;
    let mut declared: Vec<String> = Vec::new();
    for p in &f.params {
        push_unique(&mut declared, &p.name);
    }
    collect_assigned(&f.body, &mut declared);
    table.scopes.push(ScopeInfo { id, name: f.name.clone(), parent: chain.last().copied(), declared, captured: Vec::new() });
    f.scope = Some(id);
    chain.push(id);
    let r = resolve_block(&mut f.body, table, chain);
    chain.pop();
    r
}

fn resolve_block(stmts: &mut [Stmt], table: &mut ScopeTable, chain: &mut Vec<u32>) -> Result<(), CompileError> {
    for s in stmts.iter_mut() {
        match &mut s.kind {
            StmtKind::Assign { target, value } => {
                resolve_expr(value, table, chain)?;
                resolve_target(target, table, chain)?;
            }
            StmtKind::AugAssign { target, value, .. } => {
                resolve_expr(value, table, chain)?;
                resolve_target(target, table, chain)?;
            }
            StmtKind::Expr(e) => resolve_expr(e, table, chain)?,
            StmtKind::If { cond, then, orelse } => {
                resolve_expr(cond, table, chain)?;
                resolve_block(then, table, chain)?;
                resolve_block(orelse, table, chain)?;
            }
            StmtKind::For { target, iter, body } => {
                resolve_expr(iter, table, chain)?;
                resolve_target(target, table, chain)?;
                resolve_block(body, table, chain)?;
            }
            StmtKind::While { cond, body } => {
                resolve_expr(cond, table, chain)?;
                resolve_block(body, table, chain)?;
            }
            StmtKind::FunctionDef(f) => elaborate_function(f, table, chain)?,
            StmtKind::Return(Some(e)) => resolve_expr(e, table, chain)?,
            StmtKind::Pass | StmtKind::Return(None) => {}
        }
    }
    Ok(())
}

fn resolve_target(t: &mut Target, table: &mut ScopeTable, chain: &mut Vec<u32>) -> Result<(), CompileError> {
    match &mut t.kind {
        TargetKind::Name(n) => {
            n.resolved = Some(Resolution::Var(*chain.last().unwrap()));
            Ok(())
        }
        TargetKind::Tuple(items) => items.iter_mut().try_for_each(|i| resolve_target(i, table, chain)),
        TargetKind::Attribute { value, .. } => resolve_expr(value, table, chain),
        TargetKind::Subscript { value, index } => {
            resolve_expr(value, table, chain)?;
            resolve_expr(index, table, chain)
        }
    }
}

fn resolve_expr(e: &mut Expr, table: &mut ScopeTable, chain: &mut Vec<u32>) -> Result<(), CompileError> {
    if let ExprKind::Name(n) = &mut e.kind {
        n.resolved = Some(lookup(&n.id, e.span, table, chain)?);
        return Ok(());
    }
    let mut result = Ok(());
    e.for_each_child_mut(&mut |c| {
        if result.is_ok() {
            result = resolve_expr(c, table, chain);
        }
    });
    result
}

fn lookup(name: &str, span: Span, table: &mut ScopeTable, chain: &[u32]) -> Result<Resolution, CompileError> {
    let current = *chain.last().unwrap();
    for &scope in chain.iter().rev() {
        if table.declares(scope, name) {
            if scope != current && scope != MODULE_SCOPE {
                let cap = &mut table.scopes[current as usize].captured;
                if !cap.iter().any(|(n, _)| n == name) {
                    cap.push((name.to_string(), scope));
                }
            }
            return Ok(Resolution::Var(scope));
        }
    }
    if library::is_library_name(name) {
        return Ok(Resolution::Builtin);
    }
    Err(CompileError::UnboundName { span, name: name.to_string() })
}

/// Variables of scope `id` that are read or written from a different scope.
pub fn escaping_names(table: &ScopeTable, id: u32) -> BTreeSet<String> {
    table.scopes.iter().flat_map(|s| s.captured.iter()).filter(|(_, scope)| *scope == id).map(|(n, _)| n.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezoar::desugar::desugar;
    use crate::frontend::parse_module;

    fn elaborate(src: &str) -> Result<(SurfaceModule, ScopeTable), CompileError> {
        elaborate_scopes(&desugar(&parse_module(src).unwrap()))
    }

    #[test]
    fn single_local() {
        let (_, t) = elaborate("@poppy\ndef f(a):\n    b = a\n    return b\n").unwrap();
        assert_eq!(t.get(1).declared, ["a", "b"]);
    }

    #[test]
    fn closure_captures_enclosing() {
        let src = "@poppy\ndef f(a):\n    k = 2\n    def g(x):\n        return add(x, k)\n    return g(a)\n";
        let (_, t) = elaborate(src).unwrap();
        assert_eq!(t.get(2).captured, [("k".to_string(), 1)]);
        assert_eq!(escaping_names(&t, 1).into_iter().collect::<Vec<_>>(), ["k"]);
    }

    #[test]
    fn unbound_name_is_compile_error() {
        let e = elaborate("@poppy\ndef f():\n    return nothing_here\n").unwrap_err();
        assert!(matches!(e, CompileError::UnboundName { ref name, .. } if name == "nothing_here"));
    }

    #[test]
    fn local_assigned_later_shadows_global() {
        let src = "x = \"foo\"\n@poppy\ndef f():\n    print(x)\n    x = \"bar\"\n";
        let (m, _) = elaborate(src).unwrap();
        let StmtKind::Expr(Expr { kind: ExprKind::Call { args, .. }, .. }) = &m.functions[0].body[0].kind else { panic!() };
        assert!(matches!(&args[0].kind, ExprKind::Name(n) if n.resolved == Some(Resolution::Var(1))));
    }

    #[test]
    fn print_defaults_to_library() {
        let (m, _) = elaborate("@poppy\ndef f():\n    print(1)\n").unwrap();
        let StmtKind::Expr(Expr { kind: ExprKind::Call { func, .. }, .. }) = &m.functions[0].body[0].kind else { panic!() };
        assert!(matches!(&func.kind, ExprKind::Name(n) if n.resolved == Some(Resolution::Builtin)));
    }
}
