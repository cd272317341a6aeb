//! Pretty-printer for surface modules. Output re-parses to the same tree.

use super::ast::*;
use std::fmt::Write;

pub fn print_module(m: &SurfaceModule) -> String {
    let mut out = String::new();
    for f in &m.functions {
        print_function(&mut out, f, 0);
    }
    for s in &m.module_level_statements {
        print_stmt(&mut out, s, 0);
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_function(out: &mut String, f: &SurfaceFunction, depth: usize) {
    for d in &f.decorators {
        indent(out, depth);
        let _ = writeln!(out, "@{}", d.name);
    }
    indent(out, depth);
    if f.is_async {
        out.push_str("async ");
    }
    let params: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
    let _ = writeln!(out, "def {}({}):", f.name, params.join(", "));
    print_block(out, &f.body, depth + 1);
}

fn print_block(out: &mut String, body: &[Stmt], depth: usize) {
    if body.is_empty() {
        indent(out, depth);
        out.push_str("pass\n");
    }
    for s in body {
        print_stmt(out, s, depth);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::FunctionDef(f) => return print_function(out, f, depth),
        StmtKind::If { cond, then, orelse } => {
            indent(out, depth);
            let _ = writeln!(out, "if {}:", expr_to_string(cond));
            print_block(out, then, depth + 1);
            print_else(out, orelse, depth);
            return;
        }
        _ => {}
    }
    indent(out, depth);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{} = {}", target_to_string(target), top_expr(value));
        }
        StmtKind::AugAssign { target, op, value } => {
            let _ = writeln!(out, "{} {}= {}", target_to_string(target), op.symbol(), top_expr(value));
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{}", top_expr(e));
        }
        StmtKind::For { target, iter, body } => {
            let _ = writeln!(out, "for {} in {}:", target_to_string(target), top_expr(iter));
            print_block(out, body, depth + 1);
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while {}:", expr_to_string(cond));
            print_block(out, body, depth + 1);
        }
        StmtKind::Pass => out.push_str("pass\n"),
        StmtKind::Return(None) => out.push_str("return\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {}", top_expr(e));
        }
        StmtKind::If { .. } | StmtKind::FunctionDef(_) => unreachable!(),
    }
}

fn print_else(out: &mut String, orelse: &[Stmt], depth: usize) {
    if orelse.is_empty() {
        return;
    }
    if let [Stmt { kind: StmtKind::If { cond, then, orelse: inner }, .. }] = orelse {
        indent(out, depth);
        let _ = writeln!(out, "elif {}:", expr_to_string(cond));
        print_block(out, then, depth + 1);
        print_else(out, inner, depth);
        return;
    }
    indent(out, depth);
    out.push_str("else:\n");
    print_block(out, orelse, depth + 1);
}

/// Tuples at statement level print without parentheses.
fn top_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Tuple(items) if !items.is_empty() => {
            let mut s = items.iter().map(expr_to_string).collect::<Vec<_>>().join(", ");
            if items.len() == 1 {
                s.push(',');
            }
            s
        }
        _ => expr_to_string(e),
    }
}

fn target_to_string(t: &Target) -> String {
    match &t.kind {
        TargetKind::Name(n) => n.id.clone(),
        TargetKind::Tuple(items) => {
            let mut s = items.iter().map(target_to_string).collect::<Vec<_>>().join(", ");
            if items.len() == 1 {
                s.push(',');
            }
            format!("({s})")
        }
        TargetKind::Attribute { value, attr } => format!("{}.{}", atom_str(value), attr),
        TargetKind::Subscript { value, index } => format!("{}[{}]", atom_str(value), top_expr(index)),
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    write_expr(e, false)
}

fn is_atomic(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Name(_)
            | ExprKind::Lit(_)
            | ExprKind::FString(_)
            | ExprKind::Tuple(_)
            | ExprKind::Set(_)
            | ExprKind::Call { .. }
            | ExprKind::Attribute { .. }
            | ExprKind::Subscript { .. }
            | ExprKind::Builtin(_)
    )
}

fn atom_str(e: &Expr) -> String {
    atom_str_in(e, false)
}

fn atom_str_in(e: &Expr, in_hole: bool) -> String {
    if is_atomic(e) && !matches!(e.kind, ExprKind::Lit(Literal::Int(_) | Literal::Float(_))) {
        write_expr(e, in_hole)
    } else {
        format!("({})", write_expr(e, in_hole))
    }
}

fn operand(e: &Expr, in_hole: bool) -> String {
    if is_atomic(e) {
        write_expr(e, in_hole)
    } else {
        format!("({})", write_expr(e, in_hole))
    }
}

fn write_expr(e: &Expr, in_hole: bool) -> String {
    match &e.kind {
        ExprKind::Name(n) => n.id.clone(),
        ExprKind::Builtin(b) => b.clone(),
        ExprKind::Lit(l) => literal_to_string(l, in_hole),
        ExprKind::FString(parts) => {
            let mut s = String::from("f\"");
            for p in parts {
                match p {
                    FPart::Text(t) => {
                        for c in t.chars() {
                            match c {
                                '{' => s.push_str("{{"),
                                '}' => s.push_str("}}"),
                                _ => escape_char(&mut s, c, '"'),
                            }
                        }
                    }
                    FPart::Hole(h) => {
                        s.push('{');
                        s.push_str(&write_expr(h, true));
                        s.push('}');
                    }
                }
            }
            s.push('"');
            s
        }
        ExprKind::Tuple(items) => {
            let inner: Vec<String> = items.iter().map(|x| write_expr(x, in_hole)).collect();
            if items.len() == 1 {
                format!("({},)", inner[0])
            } else {
                format!("({})", inner.join(", "))
            }
        }
        ExprKind::Set(items) => {
            let inner: Vec<String> = items.iter().map(|x| write_expr(x, in_hole)).collect();
            format!("{{{}}}", inner.join(", "))
        }
        ExprKind::Call { func, args } => {
            let inner: Vec<String> = args.iter().map(|x| write_expr(x, in_hole)).collect();
            format!("{}({})", atom_str_in(func, in_hole), inner.join(", "))
        }
        ExprKind::Attribute { value, attr } => format!("{}.{}", atom_str_in(value, in_hole), attr),
        ExprKind::Subscript { value, index } => {
            let idx = match &index.kind {
                ExprKind::Tuple(items) if !items.is_empty() => {
                    let mut s = items.iter().map(|x| write_expr(x, in_hole)).collect::<Vec<_>>().join(", ");
                    if items.len() == 1 {
                        s.push(',');
                    }
                    s
                }
                _ => write_expr(index, in_hole),
            };
            format!("{}[{}]", atom_str_in(value, in_hole), idx)
        }
        ExprKind::Unary { op, operand: x } => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Pos => "+",
                UnaryOp::Invert => "~",
                UnaryOp::Not => "not ",
            };
            format!("{}{}", sym, operand(x, in_hole))
        }
        ExprKind::Binary { op, left, right } => {
            format!("{} {} {}", operand(left, in_hole), op.symbol(), operand(right, in_hole))
        }
        ExprKind::Compare { left, rest } => {
            let mut s = operand(left, in_hole);
            for (op, r) in rest {
                let _ = write!(s, " {} {}", op.symbol(), operand(r, in_hole));
            }
            s
        }
        ExprKind::BoolOp { op, values } => {
            let kw = match op {
                BoolOpKind::And => " and ",
                BoolOpKind::Or => " or ",
            };
            values.iter().map(|v| operand(v, in_hole)).collect::<Vec<_>>().join(kw)
        }
    }
}

pub fn literal_to_string(l: &Literal, in_hole: bool) -> String {
    match l {
        Literal::Int(i) => i.to_string(),
        Literal::Float(f) => format!("{f:?}"),
        Literal::Str(s) => {
            let q = if in_hole { '\'' } else { '"' };
            let mut out = String::new();
            out.push(q);
            for c in s.chars() {
                if in_hole && (c == '"' || c == '{' || c == '}') {
                    let _ = write!(out, "\\x{:02x}", c as u32);
                } else {
                    escape_char(&mut out, c, q);
                }
            }
            out.push(q);
            out
        }
        Literal::Bool(true) => "True".into(),
        Literal::Bool(false) => "False".into(),
        Literal::None => "None".into(),
        Literal::Ellipsis => "...".into(),
    }
}

fn escape_char(out: &mut String, c: char, quote: char) {
    match c {
        '\\' => out.push_str("\\\\"),
        '\n' => out.push_str("\\n"),
        '\t' => out.push_str("\\t"),
        '\r' => out.push_str("\\r"),
        '\0' => out.push_str("\\0"),
        c if c == quote => {
            let _ = write!(out, "\\x{:02x}", c as u32);
        }
        c if (c as u32) < 0x20 || c as u32 == 0x7f => {
            let _ = write!(out, "\\x{:02x}", c as u32);
        }
        c => out.push(c),
    }
}
