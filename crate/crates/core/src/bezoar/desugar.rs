//! Rewrites operators, attribute access, displays, f-strings and short-circuit
//! forms into plain calls and statements.

use crate::frontend::ast::*;

pub fn desugar(m: &SurfaceModule) -> SurfaceModule {
    let mut d = Desugarer::new(m);
    SurfaceModule {
        functions: m.functions.iter().map(|f| d.function(f)).collect(),
        module_level_statements: d.block(&m.module_level_statements),
    }
}

struct Desugarer {
    counter: u32,
}

const TEMP_PREFIX: &str = "$t";

impl Desugarer {
    fn new(m: &SurfaceModule) -> Self {
        // Continue numbering past temps left by an earlier pass.
        let mut max = 0;
        let mut scan = |name: &str| {
            if let Some(n) = name.strip_prefix(TEMP_PREFIX).and_then(|s| s.parse::<u32>().ok()) {
                max = max.max(n + 1);
            }
        };
        fn visit(stmts: &[Stmt], scan: &mut dyn FnMut(&str)) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Assign { target: Target { kind: TargetKind::Name(n), .. }, .. }
                    | StmtKind::For { target: Target { kind: TargetKind::Name(n), .. }, .. } => scan(&n.id),
                    _ => {}
                }
                match &s.kind {
                    StmtKind::If { then, orelse, .. } => {
                        visit(then, scan);
                        visit(orelse, scan);
                    }
                    StmtKind::For { body, .. } | StmtKind::While { body, .. } => visit(body, scan),
                    StmtKind::FunctionDef(f) => visit(&f.body, scan),
                    _ => {}
                }
            }
        }
        for f in &m.functions {
            visit(&f.body, &mut scan);
        }
        visit(&m.module_level_statements, &mut scan);
        Desugarer { counter: max }
    }

    fn temp(&mut self) -> String {
        let t = format!("{TEMP_PREFIX}{}", self.counter);
        self.counter += 1;
        t
    }

    fn function(&mut self, f: &SurfaceFunction) -> SurfaceFunction {
        SurfaceFunction { body: self.block(&f.body), ..f.clone() }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Vec<Stmt> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, &mut out);
        }
        out
    }

    fn assign(name: &str, value: Expr, span: Span) -> Stmt {
        let target = Target { kind: TargetKind::Name(Name::new(name)), span };
        Stmt::new(StmtKind::Assign { target, value }, span)
    }

    fn hoist(&mut self, e: Expr, pre: &mut Vec<Stmt>) -> Expr {
        let t = self.temp();
        let span = e.span;
        pre.push(Self::assign(&t, e, span));
        Expr::name(t, span)
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<Stmt>) {
        let span = s.span;
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let v = self.expr(value, out);
                self.assign_target(target, v, out);
            }
            StmtKind::AugAssign { target, op, value } => self.aug_assign(target, *op, value, span, out),
            StmtKind::Expr(e) => {
                let e = self.expr(e, out);
                out.push(Stmt::new(StmtKind::Expr(e), span));
            }
            StmtKind::If { cond, then, orelse } => {
                let cond = self.expr(cond, out);
                let then = self.block(then);
                let orelse = self.block(orelse);
                out.push(Stmt::new(StmtKind::If { cond, then, orelse }, span));
            }
            StmtKind::For { target, iter, body } => {
                let iter = self.expr(iter, out);
                let iter = if is_builtin_call(&iter, "to_sequence") {
                    iter
                } else {
                    let sp = iter.span;
                    Expr::builtin_call("to_sequence", vec![iter], sp)
                };
                let mut new_body = Vec::new();
                let target = match &target.kind {
                    TargetKind::Name(_) => target.clone(),
                    _ => {
                        let t = self.temp();
                        self.assign_target(target, Expr::name(&t, target.span), &mut new_body);
                        Target { kind: TargetKind::Name(Name::new(t)), span: target.span }
                    }
                };
                new_body.extend(self.block(body));
                out.push(Stmt::new(StmtKind::For { target, iter, body: new_body }, span));
            }
            StmtKind::While { cond, body } => {
                let mut pre = Vec::new();
                let c = self.expr(cond, &mut pre);
                let mut body = self.block(body);
                if pre.is_empty() {
                    out.push(Stmt::new(StmtKind::While { cond: c, body }, span));
                } else {
                    let flag = self.temp();
                    out.extend(pre.iter().cloned());
                    out.push(Self::assign(&flag, c.clone(), span));
                    body.extend(pre);
                    body.push(Self::assign(&flag, c, span));
                    out.push(Stmt::new(StmtKind::While { cond: Expr::name(flag, span), body }, span));
                }
            }
            StmtKind::FunctionDef(f) => {
                out.push(Stmt::new(StmtKind::FunctionDef(self.function(f)), span));
            }
            StmtKind::Pass => out.push(s.clone()),
            StmtKind::Return(e) => {
                let e = e.as_ref().map(|e| self.expr(e, out));
                out.push(Stmt::new(StmtKind::Return(e), span));
            }
        }
    }

    fn assign_target(&mut self, target: &Target, value: Expr, out: &mut Vec<Stmt>) {
        let span = target.span;
        match &target.kind {
            TargetKind::Name(n) => {
                out.push(Stmt::new(StmtKind::Assign { target: Target { kind: TargetKind::Name(n.clone()), span }, value }, span))
            }
            TargetKind::Attribute { value: obj, attr } => {
                let v = if value.contains_call() { self.hoist(value, out) } else { value };
                let o = self.expr(obj, out);
                let attr = Expr::new(ExprKind::Lit(Literal::Str(attr.clone())), span);
                out.push(Stmt::new(StmtKind::Expr(Expr::builtin_call("setattr", vec![o, attr, v], span)), span));
            }
            TargetKind::Subscript { value: obj, index } => {
                let v = if value.contains_call() { self.hoist(value, out) } else { value };
                let parts = self.seq(&[obj.as_ref(), index.as_ref()], out);
                let [o, i]: [Expr; 2] = parts.try_into().unwrap();
                out.push(Stmt::new(StmtKind::Expr(Expr::builtin_call("setitem", vec![o, i, v], span)), span));
            }
            TargetKind::Tuple(items) => {
                let n = Expr::new(ExprKind::Lit(Literal::Int(items.len() as i64)), span);
                let t = self.temp();
                out.push(Self::assign(&t, Expr::builtin_call("unpack", vec![value, n], span), span));
                for (i, item) in items.iter().enumerate() {
                    let idx = Expr::new(ExprKind::Lit(Literal::Int(i as i64)), item.span);
                    let v = Expr::builtin_call("getitem", vec![Expr::name(&t, item.span), idx], item.span);
                    self.assign_target(item, v, out);
                }
            }
        }
    }

    fn aug_assign(&mut self, target: &Target, op: BinOp, value: &Expr, span: Span, out: &mut Vec<Stmt>) {
        let iop = op.inplace_name();
        match &target.kind {
            TargetKind::Name(n) => {
                let cur = Expr::new(ExprKind::Name(n.clone()), target.span);
                let v = self.expr(value, out);
                let call = Expr::builtin_call(iop, vec![cur, v], span);
                self.assign_target(target, call, out);
            }
            TargetKind::Attribute { value: obj, attr } => {
                let o = self.expr(obj, out);
                let o = self.hoist(o, out);
                let a = Expr::new(ExprKind::Lit(Literal::Str(attr.clone())), span);
                let cur = Expr::builtin_call("getattr", vec![o.clone(), a.clone()], span);
                let cur = self.hoist(cur, out);
                let v = self.expr(value, out);
                let r = self.hoist(Expr::builtin_call(iop, vec![cur, v], span), out);
                out.push(Stmt::new(StmtKind::Expr(Expr::builtin_call("setattr", vec![o, a, r], span)), span));
            }
            TargetKind::Subscript { value: obj, index } => {
                let parts = self.seq(&[obj.as_ref(), index.as_ref()], out);
                let [o, i]: [Expr; 2] = parts.try_into().unwrap();
                let o = self.hoist(o, out);
                let i = self.hoist(i, out);
                let cur = self.hoist(Expr::builtin_call("getitem", vec![o.clone(), i.clone()], span), out);
                let v = self.expr(value, out);
                let r = self.hoist(Expr::builtin_call(iop, vec![cur, v], span), out);
                out.push(Stmt::new(StmtKind::Expr(Expr::builtin_call("setitem", vec![o, i, r], span)), span));
            }
            TargetKind::Tuple(_) => {
                // Rejected by the parser.
                let v = self.expr(value, out);
                out.push(Stmt::new(StmtKind::Expr(v), span));
            }
        }
    }

    /// Desugars operands left to right. If a later operand needs prelude
    /// statements, earlier operands that may run calls are hoisted first so
    /// evaluation order is kept.
    fn seq(&mut self, items: &[&Expr], pre: &mut Vec<Stmt>) -> Vec<Expr> {
        let mut outs: Vec<Expr> = Vec::with_capacity(items.len());
        for item in items {
            let mut p = Vec::new();
            let e = self.expr(item, &mut p);
            if !p.is_empty() {
                for o in outs.iter_mut() {
                    if o.contains_call() {
                        let taken = std::mem::replace(o, Expr::name("", o.span));
                        *o = self.hoist(taken, pre);
                    }
                }
            }
            pre.extend(p);
            outs.push(e);
        }
        outs
    }

    fn expr(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        let span = e.span;
        match &e.kind {
            ExprKind::Name(_) | ExprKind::Lit(_) | ExprKind::Builtin(_) => e.clone(),
            ExprKind::FString(parts) => {
                let holes: Vec<&Expr> = parts
                    .iter()
                    .filter_map(|p| match p {
                        FPart::Hole(h) => Some(h),
                        FPart::Text(_) => None,
                    })
                    .collect();
                let mut holes = self.seq(&holes, pre).into_iter();
                let mut args = Vec::new();
                for p in parts {
                    match p {
                        FPart::Text(t) => args.push(Expr::new(ExprKind::Lit(Literal::Str(t.clone())), span)),
                        FPart::Hole(h) => {
                            let d = holes.next().unwrap();
                            args.push(Expr::builtin_call("format", vec![d], h.span));
                        }
                    }
                }
                if args.is_empty() {
                    return Expr::new(ExprKind::Lit(Literal::Str(String::new())), span);
                }
                Expr::builtin_call("concat", args, span)
            }
            ExprKind::Tuple(items) => {
                let refs: Vec<&Expr> = items.iter().collect();
                Expr::builtin_call("make_tuple", self.seq(&refs, pre), span)
            }
            ExprKind::Set(items) => {
                let refs: Vec<&Expr> = items.iter().collect();
                Expr::builtin_call("make_frozenset", self.seq(&refs, pre), span)
            }
            ExprKind::Call { func, args } => {
                let mut refs: Vec<&Expr> = vec![func.as_ref()];
                refs.extend(args.iter());
                let mut parts = self.seq(&refs, pre);
                let func = parts.remove(0);
                Expr::new(ExprKind::Call { func: Box::new(func), args: parts }, span)
            }
            ExprKind::Attribute { value, attr } => {
                let v = self.expr(value, pre);
                let a = Expr::new(ExprKind::Lit(Literal::Str(attr.clone())), span);
                Expr::builtin_call("getattr", vec![v, a], span)
            }
            ExprKind::Subscript { value, index } => {
                let parts = self.seq(&[value.as_ref(), index.as_ref()], pre);
                Expr::builtin_call("getitem", parts, span)
            }
            ExprKind::Unary { op, operand } => {
                let v = self.expr(operand, pre);
                Expr::builtin_call(op.operator_name(), vec![v], span)
            }
            ExprKind::Binary { op, left, right } => {
                let parts = self.seq(&[left.as_ref(), right.as_ref()], pre);
                Expr::builtin_call(op.operator_name(), parts, span)
            }
            ExprKind::Compare { left, rest } if rest.len() == 1 => {
                let (op, right) = &rest[0];
                let parts = self.seq(&[left.as_ref(), right], pre);
                let [mut l, r]: [Expr; 2] = parts.try_into().unwrap();
                if op.is_membership() {
                    if l.contains_call() && r.contains_call() {
                        l = self.hoist(l, pre);
                    }
                    Expr::builtin_call(op.operator_name(), vec![r, l], span)
                } else {
                    Expr::builtin_call(op.operator_name(), vec![l, r], span)
                }
            }
            ExprKind::Compare { left, rest } => self.compare_chain(left, rest, span, pre),
            ExprKind::BoolOp { op, values } => {
                let result = self.temp();
                let first = self.expr(&values[0], pre);
                pre.push(Self::assign(&result, first, span));
                let tail = self.bool_tail(*op, &values[1..], &result, span);
                pre.extend(tail);
                Expr::name(result, span)
            }
        }
    }

    fn bool_tail(&mut self, op: BoolOpKind, rest: &[Expr], result: &str, span: Span) -> Vec<Stmt> {
        let Some((next, more)) = rest.split_first() else {
            return Vec::new();
        };
        let mut branch = Vec::new();
        let v = self.expr(next, &mut branch);
        branch.push(Self::assign(result, v, span));
        branch.extend(self.bool_tail(op, more, result, span));
        let cond = Expr::name(result, span);
        let kind = match op {
            BoolOpKind::And => StmtKind::If { cond, then: branch, orelse: Vec::new() },
            BoolOpKind::Or => StmtKind::If { cond, then: Vec::new(), orelse: branch },
        };
        vec![Stmt::new(kind, span)]
    }

    fn compare_chain(&mut self, left: &Expr, rest: &[(CmpOp, Expr)], span: Span, pre: &mut Vec<Stmt>) -> Expr {
        let result = self.temp();
        let mut l = self.expr(left, pre);
        if l.contains_call() {
            l = self.hoist(l, pre);
        }
        let stmts = self.chain_step(l, rest, &result, span);
        pre.extend(stmts);
        Expr::name(result, span)
    }

    fn chain_step(&mut self, l: Expr, rest: &[(CmpOp, Expr)], result: &str, span: Span) -> Vec<Stmt> {
        let ((op, right), more) = rest.split_first().unwrap();
        let mut out = Vec::new();
        let mut r = self.expr(right, &mut out);
        if !more.is_empty() {
            r = self.hoist(r, &mut out);
        }
        let call = if op.is_membership() {
            Expr::builtin_call(op.operator_name(), vec![r.clone(), l], span)
        } else {
            Expr::builtin_call(op.operator_name(), vec![l, r.clone()], span)
        };
        out.push(Self::assign(result, call, span));
        if !more.is_empty() {
            let then = self.chain_step(r, more, result, span);
            out.push(Stmt::new(StmtKind::If { cond: Expr::name(result, span), then, orelse: Vec::new() }, span));
        }
        out
    }
}

fn is_builtin_call(e: &Expr, name: &str) -> bool {
    matches!(&e.kind, ExprKind::Call { func, .. } if matches!(&func.kind, ExprKind::Builtin(b) if b == name))
}
