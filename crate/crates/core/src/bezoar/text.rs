//! Text form of Bezoar programs.

use std::collections::HashSet;
use std::fmt::Write;

use super::ir::*;
use crate::control::Annotation;
use crate::error::CompileError;
use crate::irtext::{block_end, err, lines, literal_of, render_literal, Cur, Line, T};

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for e in &p.externals {
        let a = if e.is_async { " async" } else { "" };
        let _ = writeln!(out, "extern {}{} {}", e.annotation, a, e.name);
    }
    for g in &p.globals {
        let _ = writeln!(out, "declare {g}");
    }
    for f in &p.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "def {}({}):", f.name, f.params.join(", "));
        print_body(&mut out, &f.body, f.ret.as_ref(), 1);
    }
    out
}

pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "def {}({}):", f.name, f.params.join(", "));
    print_body(&mut out, &f.body, f.ret.as_ref(), 1);
    out
}

fn pad(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

pub fn atom_str(a: &Atom) -> String {
    match a {
        Atom::Reg(r) => r.clone(),
        Atom::Lit(l) => render_literal(l),
    }
}

fn atoms(a: &[Atom]) -> String {
    a.iter().map(atom_str).collect::<Vec<_>>().join(", ")
}

fn print_body(out: &mut String, stmts: &[Stmt], ret: Option<&Atom>, depth: usize) {
    for s in stmts {
        print_stmt(out, s, depth);
    }
    if let Some(r) = ret {
        pad(out, depth);
        let _ = writeln!(out, "return {}", atom_str(r));
    }
}

fn print_block(out: &mut String, b: &Block, depth: usize) {
    for s in &b.stmts {
        print_stmt(out, s, depth);
    }
    if !b.yields.is_empty() {
        pad(out, depth);
        let _ = writeln!(out, "yield {}", atoms(&b.yields));
    }
}

fn outs_suffix(outs: &[Reg]) -> String {
    if outs.is_empty() {
        String::new()
    } else {
        format!(" -> {}", outs.join(", "))
    }
}

fn carried_str(c: &[Carried]) -> String {
    if c.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = c.iter().map(|c| format!("{} = {}", c.param, atom_str(&c.init))).collect();
    format!(" with ({})", parts.join(", "))
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    pad(out, depth);
    match s {
        Stmt::Declare { var } => {
            let _ = writeln!(out, "declare {}", var.name);
        }
        Stmt::Store { var, value } => {
            let _ = writeln!(out, "store {} {}", var.name, atom_str(value));
        }
        Stmt::Load { dest, var } => {
            let _ = writeln!(out, "{dest} := load {}", var.name);
        }
        Stmt::Const { dest, value } => {
            let v = match value {
                ConstValue::Lit(l) => format!("const {}", render_literal(l)),
                ConstValue::Unbound => "const unbound".into(),
                ConstValue::Extern(n) => format!("extern {n}"),
                ConstValue::Func(n) => format!("func {n}"),
            };
            let _ = writeln!(out, "{dest} := {v}");
        }
        Stmt::Copy { dest, src } => {
            let _ = writeln!(out, "{dest} := {}", atom_str(src));
        }
        Stmt::Call { dest, callee, args } => {
            let c = match callee {
                Callee::Reg(r) | Callee::External(r) | Callee::Func(r) => r,
            };
            let _ = writeln!(out, "{dest} := {c}({})", atoms(args));
        }
        Stmt::CheckBound { dest, src, name } => {
            let _ = writeln!(out, "{dest} := checkbound({src}, {})", render_literal(&crate::frontend::Literal::Str(name.clone())));
        }
        Stmt::Closure { dest, func } => {
            let _ = writeln!(out, "{dest} := closure {}({}):", func.name, func.params.join(", "));
            print_body(out, &func.body, func.ret.as_ref(), depth + 1);
        }
        Stmt::If { cond, then, orelse, outs } => {
            let _ = writeln!(out, "if {cond}{}:", outs_suffix(outs));
            print_block(out, then, depth + 1);
            if !orelse.stmts.is_empty() || !orelse.yields.is_empty() {
                pad(out, depth);
                out.push_str("else:\n");
                print_block(out, orelse, depth + 1);
            }
        }
        Stmt::ForEach { item, iter, carried, body, outs } => {
            let _ = writeln!(out, "for {item} in {iter}{}{}:", carried_str(carried), outs_suffix(outs));
            print_block(out, body, depth + 1);
        }
        Stmt::While { carried, cond_block, cond, body, outs } => {
            let _ = writeln!(out, "while{}{}:", carried_str(carried), outs_suffix(outs));
            pad(out, depth + 1);
            out.push_str("cond:\n");
            for s in cond_block {
                print_stmt(out, s, depth + 2);
            }
            pad(out, depth + 2);
            let _ = writeln!(out, "test {cond}");
            pad(out, depth + 1);
            out.push_str("do:\n");
            print_block(out, body, depth + 2);
        }
    }
}

/// Parses the text form. Undeclared variables resolve to the module scope;
/// call targets that are neither registers nor functions are externals.
pub fn parse_program(src: &str) -> Result<Program, CompileError> {
    let ls = lines(src)?;
    let mut externals = Vec::new();
    let mut globals = Vec::new();
    let mut headers = Vec::new();
    let mut i = 0;
    while i < ls.len() {
        let line = &ls[i];
        if line.indent != 0 {
            return Err(err(line.lineno, "unexpected indentation"));
        }
        let mut c = Cur::new(line);
        let kw = c.ident()?;
        match kw.as_str() {
            "extern" => {
                let ann: Annotation = c.ident()?.parse().map_err(|e: String| err(line.lineno, e))?;
                let mut name = c.ident()?;
                let mut is_async = false;
                if name == "async" && !c.done() {
                    is_async = true;
                    name = c.ident()?;
                }
                c.end()?;
                externals.push(ExternDecl { name, annotation: ann, is_async });
                i += 1;
            }
            "declare" => {
                globals.push(c.ident()?);
                c.end()?;
                i += 1;
            }
            "def" => {
                let end = block_end(&ls, i + 1, 0);
                headers.push((i, end));
                i = end;
            }
            _ => return Err(err(line.lineno, format!("unexpected `{kw}`"))),
        }
    }
    let mut names: HashSet<String> = HashSet::new();
    for &(h, _) in &headers {
        let mut c = Cur::new(&ls[h]);
        c.ident()?;
        names.insert(c.ident()?);
    }
    let mut parser = Parser { lines: &ls, funcs: names, next_scope: 1, scopes: Vec::new() };
    let mut functions = Vec::new();
    for (h, end) in headers {
        functions.push(parser.function(h, end, HashSet::new())?);
    }
    let entry = functions
        .iter()
        .map(|f| f.name.clone())
        .find(|n| n == super::anf::MAIN || n == super::anf::MODULE_BODY)
        .or_else(|| functions.first().map(|f| f.name.clone()))
        .unwrap_or_default();
    Ok(Program { externals, globals, functions, entry })
}

struct Parser<'a> {
    lines: &'a [Line],
    funcs: HashSet<String>,
    next_scope: u32,
    /// Innermost last: (scope id, declared names).
    scopes: Vec<(u32, HashSet<String>)>,
}

impl<'a> Parser<'a> {
    fn function(&mut self, header: usize, end: usize, mut regs: HashSet<String>) -> Result<Function, CompileError> {
        let line = &self.lines[header];
        let mut c = Cur::new(line);
        let kw = c.ident()?;
        let (dest, name) = if kw == "def" {
            (None, c.ident()?)
        } else {
            c.sym(":=")?;
            if c.ident()? != "closure" {
                return Err(err(line.lineno, "expected closure"));
            }
            (Some(kw), c.ident()?)
        };
        c.sym("(")?;
        let params = c.ident_list()?;
        c.sym(")")?;
        c.sym(":")?;
        c.end()?;
        let _ = dest;
        regs.extend(params.iter().cloned());
        let scope = self.next_scope;
        self.next_scope += 1;
        let declared: HashSet<String> = self.lines[header + 1..end]
            .iter()
            .filter(|l| l.indent == line.indent + 4 || l.indent > line.indent)
            .filter_map(|l| match (l.toks.first(), l.toks.get(1)) {
                (Some(T::Ident(k)), Some(T::Ident(n))) if k == "declare" => Some(n.clone()),
                _ => None,
            })
            .collect();
        self.scopes.push((scope, declared));
        let mut body = Vec::new();
        let mut ret = None;
        let r = self.stmts(header + 1, end, &mut regs, &mut body, &mut ret);
        self.scopes.pop();
        r?;
        Ok(Function { name, params, scope, body, ret })
    }

    fn var(&self, name: &str) -> VarRef {
        for (id, names) in self.scopes.iter().rev() {
            if names.contains(name) {
                return VarRef::new(name, *id);
            }
        }
        VarRef::new(name, MODULE_SCOPE)
    }

    fn atom(&self, c: &mut Cur, regs: &HashSet<String>) -> Result<Atom, CompileError> {
        let line = c.line;
        let t = c.next().ok_or_else(|| err(line, "expected operand"))?.clone();
        if let Some(l) = literal_of(&t) {
            return Ok(Atom::Lit(l));
        }
        match t {
            T::Ident(r) if regs.contains(&r) => Ok(Atom::Reg(r)),
            T::Ident(r) => Err(err(line, format!("register `{r}` used before definition"))),
            _ => Err(err(line, "expected operand")),
        }
    }

    fn atom_list(&self, c: &mut Cur, regs: &HashSet<String>, close: &str) -> Result<Vec<Atom>, CompileError> {
        let mut out = Vec::new();
        while !c.is_sym(close) {
            out.push(self.atom(c, regs)?);
            if !c.eat_sym(",") {
                break;
            }
        }
        c.sym(close)?;
        Ok(out)
    }

    fn define(regs: &mut HashSet<String>, r: &str, line: usize) -> Result<(), CompileError> {
        if !regs.insert(r.to_string()) {
            return Err(err(line, format!("register `{r}` assigned twice")));
        }
        Ok(())
    }

    fn carried(&self, c: &mut Cur, regs: &mut HashSet<String>) -> Result<Vec<Carried>, CompileError> {
        let mut out = Vec::new();
        if c.is_ident("with") {
            c.next();
            c.sym("(")?;
            while !c.is_sym(")") {
                let param = c.ident()?;
                c.sym("=")?;
                let init = self.atom(c, regs)?;
                out.push(Carried { param, init });
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.sym(")")?;
        }
        for p in &out {
            Self::define(regs, &p.param, c.line)?;
        }
        Ok(out)
    }

    fn outs(c: &mut Cur) -> Result<Vec<Reg>, CompileError> {
        if c.eat_sym("->") {
            c.ident_list()
        } else {
            Ok(Vec::new())
        }
    }

    fn block(&mut self, start: usize, end: usize, regs: &mut HashSet<String>) -> Result<Block, CompileError> {
        let mut b = Block::default();
        let mut ret = None;
        let mut i = start;
        let mut stmt_end = end;
        if end > start {
            let last = &self.lines[end - 1];
            if last.toks.first() == Some(&T::Ident("yield".into())) && last.indent == self.lines[start].indent {
                stmt_end = end - 1;
            }
        }
        self.stmts(i, stmt_end, regs, &mut b.stmts, &mut ret)?;
        if ret.is_some() {
            return Err(err(self.lines[start].lineno, "return inside block"));
        }
        if stmt_end < end {
            i = stmt_end;
            let mut c = Cur::new(&self.lines[i]);
            c.ident()?;
            while !c.done() {
                b.yields.push(self.atom(&mut c, regs)?);
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.end()?;
        }
        Ok(b)
    }

    fn stmts(
        &mut self,
        start: usize,
        end: usize,
        regs: &mut HashSet<String>,
        out: &mut Vec<Stmt>,
        ret: &mut Option<Atom>,
    ) -> Result<(), CompileError> {
        let mut i = start;
        while i < end {
            let line = &self.lines[i];
            let lineno = line.lineno;
            let indent = line.indent;
            let block_close = block_end(self.lines, i + 1, indent).min(end);
            let mut c = Cur::new(line);
            let first = c.ident()?;
            match first.as_str() {
                "declare" => {
                    let n = c.ident()?;
                    c.end()?;
                    out.push(Stmt::Declare { var: self.var(&n) });
                    i += 1;
                }
                "store" => {
                    let n = c.ident()?;
                    let value = self.atom(&mut c, regs)?;
                    c.end()?;
                    out.push(Stmt::Store { var: self.var(&n), value });
                    i += 1;
                }
                "return" => {
                    let a = self.atom(&mut c, regs)?;
                    c.end()?;
                    *ret = Some(a);
                    i += 1;
                    if i != end {
                        return Err(err(lineno, "return must be last"));
                    }
                }
                "if" => {
                    let cond = match self.atom(&mut c, regs)? {
                        Atom::Reg(r) => r,
                        Atom::Lit(_) => return Err(err(lineno, "condition must be a register")),
                    };
                    let outs = Self::outs(&mut c)?;
                    c.sym(":")?;
                    c.end()?;
                    let then = self.block(i + 1, block_close, &mut regs.clone())?;
                    i = block_close;
                    let mut orelse = Block::default();
                    if i < end && self.lines[i].indent == indent && self.lines[i].toks.first() == Some(&T::Ident("else".into())) {
                        let close = block_end(self.lines, i + 1, indent).min(end);
                        orelse = self.block(i + 1, close, &mut regs.clone())?;
                        i = close;
                    }
                    for o in &outs {
                        Self::define(regs, o, lineno)?;
                    }
                    out.push(Stmt::If { cond, then, orelse, outs });
                }
                "for" => {
                    let item = c.ident()?;
                    if c.ident()? != "in" {
                        return Err(err(lineno, "expected `in`"));
                    }
                    let iter = c.ident()?;
                    let mut inner = regs.clone();
                    let carried = self.carried(&mut c, &mut inner)?;
                    let outs = Self::outs(&mut c)?;
                    c.sym(":")?;
                    c.end()?;
                    Self::define(&mut inner, &item, lineno)?;
                    let body = self.block(i + 1, block_close, &mut inner)?;
                    for o in &outs {
                        Self::define(regs, o, lineno)?;
                    }
                    out.push(Stmt::ForEach { item, iter, carried, body, outs });
                    i = block_close;
                }
                "while" => {
                    let mut inner = regs.clone();
                    let carried = self.carried(&mut c, &mut inner)?;
                    let outs = Self::outs(&mut c)?;
                    c.sym(":")?;
                    c.end()?;
                    let j = i + 1;
                    if j >= block_close || self.lines[j].toks.first() != Some(&T::Ident("cond".into())) {
                        return Err(err(lineno, "expected `cond:`"));
                    }
                    let cond_close = block_end(self.lines, j + 1, self.lines[j].indent).min(block_close);
                    if cond_close == j + 1 {
                        return Err(err(lineno, "missing `test`"));
                    }
                    let mut cond_block = Vec::new();
                    let mut r = None;
                    self.stmts(j + 1, cond_close - 1, &mut inner, &mut cond_block, &mut r)?;
                    let mut tc = Cur::new(&self.lines[cond_close - 1]);
                    if tc.ident()? != "test" {
                        return Err(err(self.lines[cond_close - 1].lineno, "expected `test`"));
                    }
                    let cond = tc.ident()?;
                    if cond_close >= block_close || self.lines[cond_close].toks.first() != Some(&T::Ident("do".into())) {
                        return Err(err(lineno, "expected `do:`"));
                    }
                    let body = self.block(cond_close + 1, block_close, &mut inner.clone())?;
                    for o in &outs {
                        Self::define(regs, o, lineno)?;
                    }
                    out.push(Stmt::While { carried, cond_block, cond, body, outs });
                    i = block_close;
                }
                _ => {
                    let dest = first;
                    c.sym(":=")?;
                    let stmt = match c.peek().cloned() {
                        Some(T::Ident(k)) if k == "closure" => {
                            let f = self.function(i, block_close, regs.clone())?;
                            i = block_close;
                            Self::define(regs, &dest, lineno)?;
                            out.push(Stmt::Closure { dest, func: Box::new(f) });
                            continue;
                        }
                        Some(T::Ident(k)) if k == "load" && c.toks.len() == 4 => {
                            c.next();
                            let n = c.ident()?;
                            Stmt::Load { dest: dest.clone(), var: self.var(&n) }
                        }
                        Some(T::Ident(k)) if (k == "extern" || k == "func") && c.toks.len() == 4 => {
                            c.next();
                            let n = c.ident()?;
                            let value = if k == "extern" { ConstValue::Extern(n) } else { ConstValue::Func(n) };
                            Stmt::Const { dest: dest.clone(), value }
                        }
                        Some(T::Ident(k)) if k == "const" && c.toks.len() == 4 => {
                            c.next();
                            let t = c.next().cloned().ok_or_else(|| err(lineno, "expected constant"))?;
                            let value = match (&t, literal_of(&t)) {
                                (_, Some(l)) => ConstValue::Lit(l),
                                (T::Ident(u), None) if u == "unbound" => ConstValue::Unbound,
                                _ => return Err(err(lineno, "bad constant")),
                            };
                            Stmt::Const { dest: dest.clone(), value }
                        }
                        Some(T::Ident(k)) if k == "checkbound" && c.toks.get(3) == Some(&T::Sym("(")) => {
                            c.next();
                            c.sym("(")?;
                            let src = c.ident()?;
                            c.sym(",")?;
                            let name = match c.next() {
                                Some(T::Str(s)) => s.clone(),
                                _ => return Err(err(lineno, "expected variable name")),
                            };
                            c.sym(")")?;
                            Stmt::CheckBound { dest: dest.clone(), src, name }
                        }
                        Some(T::Ident(k)) if c.toks.get(3) == Some(&T::Sym("(")) => {
                            c.next();
                            c.sym("(")?;
                            let args = self.atom_list(&mut c, regs, ")")?;
                            let callee = if regs.contains(&k) {
                                Callee::Reg(k)
                            } else if self.funcs.contains(&k) {
                                Callee::Func(k)
                            } else {
                                Callee::External(k)
                            };
                            Stmt::Call { dest: dest.clone(), callee, args }
                        }
                        _ => {
                            let src = self.atom(&mut c, regs)?;
                            Stmt::Copy { dest: dest.clone(), src }
                        }
                    };
                    c.end()?;
                    Self::define(regs, &dest, lineno)?;
                    out.push(stmt);
                    i += 1;
                }
            }
        }
        Ok(())
    }
}
