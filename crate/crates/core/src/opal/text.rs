//! Text form of λ^O programs.

use std::collections::HashSet;
use std::fmt::Write;

use super::ir::*;
use crate::bezoar::ir::{Atom, ConstValue, ExternDecl, Reg};
use crate::bezoar::text::atom_str;
use crate::control::Annotation;
use crate::error::CompileError;
use crate::frontend::Literal;
use crate::irtext::{block_end, err, lines, literal_of, render_literal, Cur, Line, T};

pub fn emit_opal_text(p: &OpalProgram) -> String {
    let mut out = String::new();
    for e in &p.externals {
        let a = if e.is_async { " async" } else { "" };
        let _ = writeln!(out, "extern {}{} {}", e.annotation, a, e.name);
    }
    for d in &p.defs {
        if !out.is_empty() {
            out.push('\n');
        }
        print_def(&mut out, d, 0);
    }
    out
}

fn pad(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn atoms(a: &[Atom]) -> String {
    a.iter().map(atom_str).collect::<Vec<_>>().join(", ")
}

fn outs(o: &[Reg]) -> String {
    if o.is_empty() {
        "()".into()
    } else {
        o.join(", ")
    }
}

fn key_str(k: &Key) -> String {
    match &k.frame {
        Some(f) => format!("{}@{f}", k.name),
        None => k.name.clone(),
    }
}

fn print_def(out: &mut String, d: &Def, depth: usize) {
    pad(out, depth);
    let _ = writeln!(out, "def {}({}):", d.name, d.params.join(", "));
    let captures: Vec<(&str, &[Reg])> = d
        .body
        .iter()
        .filter_map(|b| match b {
            Binding::Def(n) => Some((n.name.as_str(), n.captures.as_slice())),
            _ => None,
        })
        .collect();
    for b in &d.body {
        print_binding(out, b, depth + 1, &captures);
    }
    pad(out, depth + 1);
    let r = if d.ret.is_empty() { "()".to_string() } else { atoms(&d.ret) };
    let _ = writeln!(out, "return {r}");
}

fn print_binding(out: &mut String, b: &Binding, depth: usize, captures: &[(&str, &[Reg])]) {
    if let Binding::Def(d) = b {
        print_def(out, d, depth);
        return;
    }
    pad(out, depth);
    let _ = match b {
        Binding::Const { dest, value } => match value {
            ConstValue::Lit(l) => writeln!(out, "{dest} := const {}", render_literal(l)),
            ConstValue::Unbound => writeln!(out, "{dest} := const unbound"),
            ConstValue::Extern(n) => writeln!(out, "{dest} := extern {n}"),
            ConstValue::Func(n) => writeln!(out, "{dest} := func {n}"),
        },
        Binding::Frame { dest } => writeln!(out, "{dest} := frame()"),
        Binding::Load { dest, mem, key } => writeln!(out, "{dest} := load({mem}, {})", key_str(key)),
        Binding::Store { dest_mem, mem, key, value } => {
            writeln!(out, "{dest_mem} := store({mem}, {}, {})", key_str(key), atom_str(value))
        }
        Binding::ExtCall { s_out, dest, name, s_in, args } => {
            let mut all = vec![Atom::Reg(s_in.clone())];
            all.extend(args.iter().cloned());
            writeln!(out, "{s_out}, {dest} := {name}({})", atoms(&all))
        }
        Binding::Apply { m_out, s_out, dest, callee, m_in, s_in, args } => {
            let mut all = vec![Atom::Reg(callee.clone()), Atom::Reg(m_in.clone()), Atom::Reg(s_in.clone())];
            all.extend(args.iter().cloned());
            writeln!(out, "{m_out}, {s_out}, {dest} := apply({})", atoms(&all))
        }
        Binding::Invoke { outs: o, func, args } => writeln!(out, "{} := {func}({})", outs(o), atoms(args)),
        Binding::Ite { outs: o, cond, then, orelse } => writeln!(out, "{} := ite({cond}, {then}, {orelse})", outs(o)),
        Binding::Fold { outs: o, list, init, body } => {
            writeln!(out, "{} := fold({list}, ({}), {body})", outs(o), atoms(init))
        }
        Binding::CheckBound { dest, src, name } => {
            writeln!(out, "{dest} := checkbound({src}, {})", render_literal(&Literal::Str(name.clone())))
        }
        Binding::Closure { dest, func } => {
            let caps = captures.iter().find(|(n, _)| n == func).map(|(_, c)| *c).unwrap_or(&[]);
            let mut parts = vec![func.clone()];
            parts.extend(caps.iter().cloned());
            writeln!(out, "{dest} := closure({})", parts.join(", "))
        }
        Binding::Def(_) => unreachable!(),
    };
}

fn numbered(r: &str, prefix: char) -> bool {
    let mut cs = r.chars();
    cs.next() == Some(prefix) && {
        let rest = cs.as_str();
        !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
    }
}

pub fn is_memory_reg(r: &str) -> bool {
    numbered(r, 'M')
}

pub fn is_sequence_reg(r: &str) -> bool {
    numbered(r, 'S')
}

pub fn parse_opal_text(src: &str) -> Result<OpalProgram, CompileError> {
    let ls = lines(src)?;
    let mut externals = Vec::new();
    let mut headers = Vec::new();
    let mut i = 0;
    while i < ls.len() {
        let line = &ls[i];
        if line.indent != 0 {
            return Err(err(line.lineno, "unexpected indentation"));
        }
        let mut c = Cur::new(line);
        match c.ident()?.as_str() {
            "extern" => {
                let annotation: Annotation = c.ident()?.parse().map_err(|e: String| err(line.lineno, e))?;
                let mut name = c.ident()?;
                let mut is_async = false;
                if name == "async" && !c.done() {
                    is_async = true;
                    name = c.ident()?;
                }
                c.end()?;
                externals.push(ExternDecl { name, annotation, is_async });
                i += 1;
            }
            "def" => {
                let end = block_end(&ls, i + 1, 0);
                headers.push((i, end));
                i = end;
            }
            kw => return Err(err(line.lineno, format!("unexpected `{kw}`"))),
        }
    }
    let mut top = HashSet::new();
    for &(h, _) in &headers {
        let mut c = Cur::new(&ls[h]);
        c.ident()?;
        top.insert(c.ident()?);
    }
    let mut p = P { lines: &ls, visible: vec![top] };
    let mut defs = Vec::new();
    for (h, end) in headers {
        let mut d = p.def(h, end)?;
        d.returns_value = true;
        defs.push(d);
    }
    let entry = defs
        .iter()
        .map(|d| d.name.clone())
        .find(|n| n == crate::bezoar::anf::MAIN || n == crate::bezoar::anf::MODULE_BODY)
        .or_else(|| defs.first().map(|d| d.name.clone()))
        .unwrap_or_default();
    let mut prog = OpalProgram { externals, defs, entry };
    compute_captures(&mut prog);
    Ok(prog)
}

struct P<'a> {
    lines: &'a [Line],
    visible: Vec<HashSet<String>>,
}

impl P<'_> {
    fn is_def(&self, name: &str) -> bool {
        self.visible.iter().any(|s| s.contains(name))
    }

    fn def(&mut self, header: usize, end: usize) -> Result<Def, CompileError> {
        let line = &self.lines[header];
        let mut c = Cur::new(line);
        c.ident()?;
        let name = c.ident()?;
        c.sym("(")?;
        let params = c.ident_list()?;
        c.sym(")")?;
        c.sym(":")?;
        c.end()?;
        let indent = line.indent + 4;
        let nested: HashSet<String> = self.lines[header + 1..end]
            .iter()
            .filter(|l| l.indent == indent && l.toks.first() == Some(&T::Ident("def".into())))
            .filter_map(|l| match l.toks.get(1) {
                Some(T::Ident(n)) => Some(n.clone()),
                _ => None,
            })
            .collect();
        self.visible.push(nested);
        let r = self.body(header + 1, end);
        self.visible.pop();
        let (body, ret) = r?;
        let threads_m = matches!(ret.first(), Some(Atom::Reg(r)) if is_memory_reg(r));
        let threads_s = matches!(ret.get(threads_m as usize), Some(Atom::Reg(r)) if is_sequence_reg(r));
        Ok(Def { name, params, body, ret, threads_m, threads_s, captures: Vec::new(), returns_value: false })
    }

    fn body(&mut self, start: usize, end: usize) -> Result<(Vec<Binding>, Vec<Atom>), CompileError> {
        let mut out = Vec::new();
        let mut closures = HashSet::new();
        let mut i = start;
        while i < end {
            let line = &self.lines[i];
            let lineno = line.lineno;
            let mut c = Cur::new(line);
            let first = c.ident()?;
            if first == "def" {
                let close = block_end(self.lines, i + 1, line.indent).min(end);
                out.push(Binding::Def(Box::new(self.def(i, close)?)));
                i = close;
                continue;
            }
            if first == "return" {
                let ret = if c.eat_sym("(") {
                    c.sym(")")?;
                    Vec::new()
                } else {
                    atom_list(&mut c, None)?
                };
                c.end()?;
                if i + 1 != end {
                    return Err(err(lineno, "return must be last"));
                }
                for b in out.iter_mut() {
                    if let Binding::Def(d) = b {
                        if closures.contains(&d.name) {
                            d.returns_value = true;
                        }
                    }
                }
                return Ok((out, ret));
            }
            c.pos = 0;
            let dests = if c.eat_sym("(") {
                c.sym(")")?;
                Vec::new()
            } else {
                c.ident_list()?
            };
            c.sym(":=")?;
            let b = self.binding(&mut c, dests, lineno)?;
            if let Binding::Closure { func, .. } = &b {
                closures.insert(func.clone());
            }
            c.end()?;
            out.push(b);
            i += 1;
        }
        Err(err(self.lines.get(start.saturating_sub(1)).map_or(0, |l| l.lineno), "missing return"))
    }

    fn binding(&self, c: &mut Cur, dests: Vec<Reg>, lineno: usize) -> Result<Binding, CompileError> {
        let one = |d: &[Reg]| -> Result<Reg, CompileError> {
            match d {
                [r] => Ok(r.clone()),
                _ => Err(err(lineno, "expected one destination")),
            }
        };
        let head = c.ident()?;
        if c.done() || !c.is_sym("(") {
            // const / extern / func forms
            let value = match head.as_str() {
                "const" => {
                    let t = c.next().cloned().ok_or_else(|| err(lineno, "expected constant"))?;
                    match (&t, literal_of(&t)) {
                        (_, Some(l)) => ConstValue::Lit(l),
                        (T::Ident(u), None) if u == "unbound" => ConstValue::Unbound,
                        _ => return Err(err(lineno, "bad constant")),
                    }
                }
                "extern" => ConstValue::Extern(c.ident()?),
                "func" => ConstValue::Func(c.ident()?),
                _ => return Err(err(lineno, format!("unexpected `{head}`"))),
            };
            return Ok(Binding::Const { dest: one(&dests)?, value });
        }
        c.sym("(")?;
        let b = match head.as_str() {
            "frame" => {
                c.sym(")")?;
                Binding::Frame { dest: one(&dests)? }
            }
            "load" => {
                let mem = c.ident()?;
                c.sym(",")?;
                let key = parse_key(&c.ident()?);
                c.sym(")")?;
                Binding::Load { dest: one(&dests)?, mem, key }
            }
            "store" => {
                let mem = c.ident()?;
                c.sym(",")?;
                let key = parse_key(&c.ident()?);
                c.sym(",")?;
                let value = atom(c)?;
                c.sym(")")?;
                Binding::Store { dest_mem: one(&dests)?, mem, key, value }
            }
            "checkbound" => {
                let src = c.ident()?;
                c.sym(",")?;
                let name = match c.next() {
                    Some(T::Str(s)) => s.clone(),
                    _ => return Err(err(lineno, "expected variable name")),
                };
                c.sym(")")?;
                Binding::CheckBound { dest: one(&dests)?, src, name }
            }
            "closure" => {
                let func = c.ident()?;
                while c.eat_sym(",") {
                    c.ident()?;
                }
                c.sym(")")?;
                Binding::Closure { dest: one(&dests)?, func }
            }
            "ite" => {
                let cond = c.ident()?;
                c.sym(",")?;
                let then = c.ident()?;
                c.sym(",")?;
                let orelse = c.ident()?;
                c.sym(")")?;
                Binding::Ite { outs: dests, cond, then, orelse }
            }
            "fold" => {
                let list = c.ident()?;
                c.sym(",")?;
                c.sym("(")?;
                let init = atom_list(c, Some(")"))?;
                c.sym(",")?;
                let body = c.ident()?;
                c.sym(")")?;
                Binding::Fold { outs: dests, list, init, body }
            }
            "apply" => {
                let args = atom_list(c, Some(")"))?;
                let (Some(Atom::Reg(callee)), Some(Atom::Reg(m_in)), Some(Atom::Reg(s_in)), [m_out, s_out, dest]) =
                    (args.first(), args.get(1), args.get(2), dests.as_slice())
                else {
                    return Err(err(lineno, "malformed apply"));
                };
                Binding::Apply {
                    m_out: m_out.clone(),
                    s_out: s_out.clone(),
                    dest: dest.clone(),
                    callee: callee.clone(),
                    m_in: m_in.clone(),
                    s_in: s_in.clone(),
                    args: args[3..].to_vec(),
                }
            }
            _ if self.is_def(&head) => {
                let args = atom_list(c, Some(")"))?;
                Binding::Invoke { outs: dests, func: head, args }
            }
            _ => {
                let args = atom_list(c, Some(")"))?;
                let (Some(Atom::Reg(s_in)), [s_out, dest]) = (args.first(), dests.as_slice()) else {
                    return Err(err(lineno, format!("malformed call to `{head}`")));
                };
                Binding::ExtCall { s_out: s_out.clone(), dest: dest.clone(), name: head, s_in: s_in.clone(), args: args[1..].to_vec() }
            }
        };
        Ok(b)
    }
}

fn parse_key(s: &str) -> Key {
    match s.split_once('@') {
        Some((n, f)) => Key { name: n.to_string(), frame: Some(f.to_string()) },
        None => Key { name: s.to_string(), frame: None },
    }
}

fn atom(c: &mut Cur) -> Result<Atom, CompileError> {
    let line = c.line;
    let t = c.next().ok_or_else(|| err(line, "expected operand"))?.clone();
    if let Some(l) = literal_of(&t) {
        return Ok(Atom::Lit(l));
    }
    match t {
        T::Ident(r) => Ok(Atom::Reg(r)),
        _ => Err(err(line, "expected operand")),
    }
}

/// Comma-separated atoms up to `close` (consumed) or end of line.
fn atom_list(c: &mut Cur, close: Option<&str>) -> Result<Vec<Atom>, CompileError> {
    let mut out = Vec::new();
    loop {
        if let Some(cl) = close {
            if c.is_sym(cl) {
                break;
            }
        } else if c.done() {
            break;
        }
        out.push(atom(c)?);
        if !c.eat_sym(",") {
            break;
        }
    }
    if let Some(cl) = close {
        c.sym(cl)?;
    }
    Ok(out)
}
