//! Recursive-descent parser for the supported fragment.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::error::FrontendError;

type PResult<T> = Result<T, FrontendError>;

const UNSUPPORTED_KEYWORDS: &[(&str, &str)] = &[
    ("break", "break"),
    ("continue", "continue"),
    ("raise", "raise"),
    ("try", "try"),
    ("except", "except"),
    ("finally", "finally"),
    ("class", "class"),
    ("global", "global"),
    ("nonlocal", "nonlocal"),
    ("import", "import"),
    ("from", "import"),
    ("del", "del"),
    ("assert", "assert"),
    ("with", "with"),
    ("yield", "generator"),
    ("lambda", "lambda"),
    ("await", "await"),
    ("match", "match"),
];

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif", "else", "except",
    "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    idx: usize,
}

pub(crate) fn parse_source(src: &str) -> PResult<SurfaceModule> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, idx: 0 };
    p.module()
}

pub(crate) fn parse_expression(src: &str) -> PResult<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, idx: 0 };
    let e = p.expr_list()?;
    p.skip_newlines();
    if !p.at_eof() {
        return Err(FrontendError::syntax(p.span(), "unexpected trailing tokens"));
    }
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].tok
    }

    fn peek_n(&self, n: usize) -> &Tok {
        let i = (self.idx + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.idx].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.idx.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.idx].clone();
        if self.idx < self.toks.len() - 1 {
            self.idx += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Span> {
        if self.is_op(op) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(self.unexpected("end of line")),
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                let t = self.bump();
                Ok((n, t.span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn unexpected(&self, expected: &str) -> FrontendError {
        let found = match self.peek() {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Float(f) => format!("`{f}`"),
            Tok::Str(_) | Tok::FStr(..) => "string literal".to_string(),
            Tok::Op(o) => format!("`{o}`"),
            Tok::Newline => "end of line".to_string(),
            Tok::Indent => "indent".to_string(),
            Tok::Dedent => "dedent".to_string(),
            Tok::Eof => "end of input".to_string(),
        };
        FrontendError::syntax(self.span(), format!("expected {expected}, found {found}"))
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) {
            self.bump();
        }
    }

    fn module(&mut self) -> PResult<SurfaceModule> {
        let mut m = SurfaceModule::default();
        loop {
            self.skip_newlines();
            if self.at_eof() {
                break;
            }
            if matches!(self.peek(), Tok::Indent) {
                return Err(FrontendError::syntax(self.span(), "unexpected indent"));
            }
            if self.is_op("@") || self.is_kw("def") || self.is_kw("async") {
                m.functions.push(self.function_def(true)?);
            } else {
                m.module_level_statements.extend(self.statement()?);
            }
        }
        Ok(m)
    }

    fn function_def(&mut self, top_level: bool) -> PResult<SurfaceFunction> {
        let start = self.span();
        let mut decorators = Vec::new();
        while self.is_op("@") {
            let at = self.bump().span;
            let (name, span) = self.ident()?;
            if self.is_op("(") || self.is_op(".") {
                return Err(FrontendError::unsupported(at.to(self.span()), format!("decorator expression @{name}")));
            }
            decorators.push(Decorator { name, span: at.to(span) });
            self.expect_newline()?;
            self.skip_newlines();
        }
        let is_async = if self.is_kw("async") {
            let span = self.bump().span;
            if !self.is_kw("def") {
                return Err(FrontendError::unsupported(span, "async statement"));
            }
            true
        } else {
            false
        };
        self.expect_kw("def")?;
        let (name, _) = self.ident()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        while !self.is_op(")") {
            if self.is_op("*") || self.is_op("**") || self.is_op("/") {
                return Err(FrontendError::unsupported(self.span(), "variadic parameter"));
            }
            let (p, span) = self.ident()?;
            if self.is_op("=") {
                return Err(FrontendError::unsupported(self.span(), "default argument"));
            }
            if self.is_op(":") {
                return Err(FrontendError::unsupported(self.span(), "type annotation"));
            }
            params.push(Param { name: p, span });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        if self.is_op("->") {
            return Err(FrontendError::unsupported(self.span(), "type annotation"));
        }
        self.expect_op(":")?;
        let body = self.suite()?;
        let f = SurfaceFunction { name, params, decorators, is_async, body, span: start.to(self.prev_span()), scope: None };
        validate_function(&f, top_level)?;
        Ok(f)
    }

    fn suite(&mut self) -> PResult<Vec<Stmt>> {
        if !matches!(self.peek(), Tok::Newline) {
            return self.simple_statements();
        }
        self.bump();
        self.skip_newlines();
        if !matches!(self.peek(), Tok::Indent) {
            return Err(self.unexpected("an indented block"));
        }
        self.bump();
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            if matches!(self.peek(), Tok::Dedent) {
                self.bump();
                break;
            }
            if self.at_eof() {
                break;
            }
            body.extend(self.statement()?);
        }
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let start = self.span();
        if let Tok::Name(kw) = self.peek().clone() {
            if let Some((_, construct)) = UNSUPPORTED_KEYWORDS.iter().find(|(k, _)| *k == kw) {
                if kw != "match" || matches!(self.peek_n(1), Tok::Name(_)) {
                    return Err(FrontendError::unsupported(start, *construct));
                }
            }
            match kw.as_str() {
                "if" => return Ok(vec![self.if_stmt()?]),
                "for" => {
                    self.bump();
                    let target = self.target_list()?;
                    self.expect_kw("in")?;
                    let iter = self.expr_list()?;
                    self.expect_op(":")?;
                    let body = self.suite()?;
                    if self.is_kw("else") {
                        return Err(FrontendError::unsupported(self.span(), "for-else"));
                    }
                    let span = start.to(self.prev_span());
                    return Ok(vec![Stmt::new(StmtKind::For { target, iter, body }, span)]);
                }
                "while" => {
                    self.bump();
                    let cond = self.expr()?;
                    self.expect_op(":")?;
                    let body = self.suite()?;
                    if self.is_kw("else") {
                        return Err(FrontendError::unsupported(self.span(), "while-else"));
                    }
                    let span = start.to(self.prev_span());
                    return Ok(vec![Stmt::new(StmtKind::While { cond, body }, span)]);
                }
                "def" => {
                    let f = self.function_def(false)?;
                    let span = f.span;
                    return Ok(vec![Stmt::new(StmtKind::FunctionDef(f), span)]);
                }
                "async" => {
                    if matches!(self.peek_n(1), Tok::Name(n) if n == "def") {
                        return Err(FrontendError::unsupported(start, "async internal function"));
                    }
                    return Err(FrontendError::unsupported(start, "async statement"));
                }
                _ => {}
            }
        }
        if self.is_op("@") {
            return Err(FrontendError::unsupported(start, "decorator on nested function"));
        }
        self.simple_statements()
    }

    fn simple_statements(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.simple_statement()?];
        while self.eat_op(";") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                break;
            }
            out.push(self.simple_statement()?);
        }
        self.expect_newline()?;
        Ok(out)
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let start = self.span();
        if let Tok::Name(kw) = self.peek().clone() {
            if let Some((_, construct)) = UNSUPPORTED_KEYWORDS.iter().find(|(k, _)| *k == kw) {
                if kw != "match" {
                    return Err(FrontendError::unsupported(start, *construct));
                }
            }
            match kw.as_str() {
                "pass" => {
                    self.bump();
                    return Ok(Stmt::new(StmtKind::Pass, start));
                }
                "return" => {
                    self.bump();
                    let value =
                        if matches!(self.peek(), Tok::Newline | Tok::Eof) || self.is_op(";") { None } else { Some(self.expr_list()?) };
                    return Ok(Stmt::new(StmtKind::Return(value), start.to(self.prev_span())));
                }
                "if" | "for" | "while" | "def" | "async" | "elif" | "else" => {
                    return Err(self.unexpected("a simple statement"));
                }
                _ => {}
            }
        }
        let first = self.expr_list()?;
        if self.is_op("=") {
            self.bump();
            let target = expr_to_target(first)?;
            let value = self.expr_list()?;
            if self.is_op("=") {
                return Err(FrontendError::unsupported(self.span(), "chained assignment"));
            }
            let span = start.to(self.prev_span());
            return Ok(Stmt::new(StmtKind::Assign { target, value }, span));
        }
        if let Tok::Op(op) = self.peek().clone() {
            if let Some(bin) = aug_op(op) {
                self.bump();
                let target = expr_to_target(first)?;
                if matches!(target.kind, TargetKind::Tuple(_)) {
                    return Err(FrontendError::syntax(target.span, "illegal target for augmented assignment"));
                }
                let value = self.expr_list()?;
                let span = start.to(self.prev_span());
                return Ok(Stmt::new(StmtKind::AugAssign { target, op: bin, value }, span));
            }
            if op == ":" {
                return Err(FrontendError::unsupported(self.span(), "annotated assignment"));
            }
            if op == ":=" {
                return Err(FrontendError::unsupported(self.span(), "assignment expression"));
            }
        }
        let span = first.span;
        Ok(Stmt::new(StmtKind::Expr(first), span))
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.bump().span;
        let cond = self.expr()?;
        self.expect_op(":")?;
        let then = self.suite()?;
        self.skip_newlines_before_clause();
        let orelse = if self.is_kw("elif") {
            vec![self.if_stmt()?]
        } else if self.eat_kw("else") {
            self.expect_op(":")?;
            self.suite()?
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::If { cond, then, orelse }, start.to(self.prev_span())))
    }

    fn skip_newlines_before_clause(&mut self) {
        let mut i = self.idx;
        while matches!(self.toks[i].tok, Tok::Newline) {
            i += 1;
        }
        if matches!(&self.toks[i].tok, Tok::Name(n) if n == "elif" || n == "else") {
            self.idx = i;
        }
    }

    fn target_list(&mut self) -> PResult<Target> {
        let start = self.span();
        let mut items = vec![self.bitor()?];
        let mut trailing = false;
        while self.is_op(",") {
            self.bump();
            if self.is_kw("in") || self.is_op("=") {
                trailing = true;
                break;
            }
            items.push(self.bitor()?);
        }
        let e = if items.len() == 1 && !trailing {
            items.pop().unwrap()
        } else {
            Expr::new(ExprKind::Tuple(items), start.to(self.prev_span()))
        };
        expr_to_target(e)
    }

    /// A comma-separated expression list; more than one item forms a tuple.
    fn expr_list(&mut self) -> PResult<Expr> {
        let start = self.span();
        let first = self.expr()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.expr()?);
        }
        Ok(Expr::new(ExprKind::Tuple(items), start.to(self.prev_span())))
    }

    fn at_expr_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof)
            || self.is_op("=")
            || self.is_op(")")
            || self.is_op(";")
            || self.is_op(":")
            || aug_op_tok(self.peek())
    }

    fn expr(&mut self) -> PResult<Expr> {
        if self.is_kw("lambda") {
            return Err(FrontendError::unsupported(self.span(), "lambda"));
        }
        if self.is_kw("yield") {
            return Err(FrontendError::unsupported(self.span(), "generator"));
        }
        let e = self.or_test()?;
        if self.is_kw("if") {
            return Err(FrontendError::unsupported(self.span(), "conditional expression"));
        }
        if self.is_op(":=") {
            return Err(FrontendError::unsupported(self.span(), "assignment expression"));
        }
        Ok(e)
    }

    fn or_test(&mut self) -> PResult<Expr> {
        let first = self.and_test()?;
        if !self.is_kw("or") {
            return Ok(first);
        }
        let start = first.span;
        let mut values = vec![first];
        while self.eat_kw("or") {
            values.push(self.and_test()?);
        }
        let span = start.to(self.prev_span());
        Ok(Expr::new(ExprKind::BoolOp { op: BoolOpKind::Or, values }, span))
    }

    fn and_test(&mut self) -> PResult<Expr> {
        let first = self.not_test()?;
        if !self.is_kw("and") {
            return Ok(first);
        }
        let start = first.span;
        let mut values = vec![first];
        while self.eat_kw("and") {
            values.push(self.not_test()?);
        }
        let span = start.to(self.prev_span());
        Ok(Expr::new(ExprKind::BoolOp { op: BoolOpKind::And, values }, span))
    }

    fn not_test(&mut self) -> PResult<Expr> {
        if self.is_kw("not") {
            let start = self.bump().span;
            let operand = self.not_test()?;
            let span = start.to(operand.span);
            return Ok(Expr::new(ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand) }, span));
        }
        self.comparison()
    }

    fn comp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::NotEq,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::LtE,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::GtE,
            Tok::Name(n) if n == "in" => CmpOp::In,
            Tok::Name(n) if n == "is" => {
                if matches!(self.peek_n(1), Tok::Name(m) if m == "not") {
                    self.bump();
                    CmpOp::IsNot
                } else {
                    CmpOp::Is
                }
            }
            Tok::Name(n) if n == "not" && matches!(self.peek_n(1), Tok::Name(m) if m == "in") => {
                self.bump();
                CmpOp::NotIn
            }
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let left = self.bitor()?;
        let mut rest = Vec::new();
        while let Some(op) = self.comp_op() {
            rest.push((op, self.bitor()?));
        }
        if rest.is_empty() {
            return Ok(left);
        }
        let span = left.span.to(self.prev_span());
        Ok(Expr::new(ExprKind::Compare { left: Box::new(left), rest }, span))
    }

    fn binary_level(&mut self, ops: &[(&str, BinOp)], next: fn(&mut Self) -> PResult<Expr>) -> PResult<Expr> {
        let mut left = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.is_op(sym) {
                    self.bump();
                    let right = next(self)?;
                    let span = left.span.to(right.span);
                    left = Expr::new(ExprKind::Binary { op: *op, left: Box::new(left), right: Box::new(right) }, span);
                    continue 'outer;
                }
            }
            return Ok(left);
        }
    }

    fn bitor(&mut self) -> PResult<Expr> {
        self.binary_level(&[("|", BinOp::BitOr)], Self::bitxor)
    }

    fn bitxor(&mut self) -> PResult<Expr> {
        self.binary_level(&[("^", BinOp::BitXor)], Self::bitand)
    }

    fn bitand(&mut self) -> PResult<Expr> {
        self.binary_level(&[("&", BinOp::BitAnd)], Self::shift)
    }

    fn shift(&mut self) -> PResult<Expr> {
        self.binary_level(&[("<<", BinOp::LShift), (">>", BinOp::RShift)], Self::arith)
    }

    fn arith(&mut self) -> PResult<Expr> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::term)
    }

    fn term(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("//", BinOp::FloorDiv), ("%", BinOp::Mod), ("@", BinOp::MatMul)],
            Self::factor,
        )
    }

    fn factor(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Op("-") => Some(UnaryOp::Neg),
            Tok::Op("+") => Some(UnaryOp::Pos),
            Tok::Op("~") => Some(UnaryOp::Invert),
            _ => None,
        };
        if let Some(op) = op {
            let start = self.bump().span;
            let operand = self.factor()?;
            let span = start.to(operand.span);
            return Ok(Expr::new(ExprKind::Unary { op, operand: Box::new(operand) }, span));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.eat_op("**") {
            let exp = self.factor()?;
            let span = base.span.to(exp.span);
            return Ok(Expr::new(ExprKind::Binary { op: BinOp::Pow, left: Box::new(base), right: Box::new(exp) }, span));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        loop {
            if self.is_op("(") {
                self.bump();
                let mut args = Vec::new();
                while !self.is_op(")") {
                    if self.is_op("*") || self.is_op("**") {
                        return Err(FrontendError::unsupported(self.span(), "star argument"));
                    }
                    if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_n(1), Tok::Op("=")) {
                        return Err(FrontendError::unsupported(self.span(), "keyword argument"));
                    }
                    let arg = self.expr()?;
                    if self.is_kw("for") {
                        return Err(FrontendError::unsupported(self.span(), "comprehension"));
                    }
                    args.push(arg);
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(")")?;
                let span = e.span.to(self.prev_span());
                e = Expr::new(ExprKind::Call { func: Box::new(e), args }, span);
            } else if self.is_op(".") {
                self.bump();
                let (attr, _) = self.ident()?;
                let span = e.span.to(self.prev_span());
                e = Expr::new(ExprKind::Attribute { value: Box::new(e), attr }, span);
            } else if self.is_op("[") {
                self.bump();
                if self.is_op(":") {
                    return Err(FrontendError::unsupported(self.span(), "slice"));
                }
                let index = self.expr_list()?;
                if self.is_op(":") {
                    return Err(FrontendError::unsupported(self.span(), "slice"));
                }
                self.expect_op("]")?;
                let span = e.span.to(self.prev_span());
                e = Expr::new(ExprKind::Subscript { value: Box::new(e), index: Box::new(index) }, span);
            } else {
                return Ok(e);
            }
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::new(ExprKind::Lit(Literal::Int(i)), start))
            }
            Tok::Float(f) => {
                self.bump();
                Ok(Expr::new(ExprKind::Lit(Literal::Float(f)), start))
            }
            Tok::Str(_) | Tok::FStr(..) => self.strings(),
            Tok::Op("...") => {
                self.bump();
                Ok(Expr::new(ExprKind::Lit(Literal::Ellipsis), start))
            }
            Tok::Op("(") => {
                self.bump();
                if self.eat_op(")") {
                    return Ok(Expr::new(ExprKind::Tuple(Vec::new()), start.to(self.prev_span())));
                }
                if self.is_kw("yield") {
                    return Err(FrontendError::unsupported(self.span(), "generator"));
                }
                let first = self.expr()?;
                if self.is_kw("for") {
                    return Err(FrontendError::unsupported(self.span(), "comprehension"));
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op(")") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op(")")?;
                Ok(Expr::new(ExprKind::Tuple(items), start.to(self.prev_span())))
            }
            Tok::Op("[") => {
                self.bump();
                if !self.is_op("]") {
                    let _ = self.expr()?;
                    if self.is_kw("for") {
                        return Err(FrontendError::unsupported(start.to(self.span()), "comprehension"));
                    }
                }
                Err(FrontendError::unsupported(start, "list display"))
            }
            Tok::Op("{") => {
                self.bump();
                if self.is_op("}") {
                    return Err(FrontendError::unsupported(start, "dict display"));
                }
                let first = self.expr()?;
                if self.is_op(":") {
                    return Err(FrontendError::unsupported(start, "dict display"));
                }
                if self.is_kw("for") {
                    return Err(FrontendError::unsupported(start, "comprehension"));
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op("}") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op("}")?;
                Ok(Expr::new(ExprKind::Set(items), start.to(self.prev_span())))
            }
            Tok::Name(n) => match n.as_str() {
                "True" => {
                    self.bump();
                    Ok(Expr::new(ExprKind::Lit(Literal::Bool(true)), start))
                }
                "False" => {
                    self.bump();
                    Ok(Expr::new(ExprKind::Lit(Literal::Bool(false)), start))
                }
                "None" => {
                    self.bump();
                    Ok(Expr::new(ExprKind::Lit(Literal::None), start))
                }
                "lambda" => Err(FrontendError::unsupported(start, "lambda")),
                "await" => Err(FrontendError::unsupported(start, "await")),
                "yield" => Err(FrontendError::unsupported(start, "generator")),
                _ => {
                    let (id, span) = self.ident()?;
                    Ok(Expr::name(id, span))
                }
            },
            _ => Err(self.unexpected("an expression")),
        }
    }

    /// Adjacent string literals concatenate; any f-string part makes the
    /// whole an f-string.
    fn strings(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut parts: Vec<FPart> = Vec::new();
        let mut any_f = false;
        loop {
            match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    push_text(&mut parts, &s);
                }
                Tok::FStr(raw, pos) => {
                    let span = self.bump().span;
                    any_f = true;
                    parse_fstring(&raw, pos, span, &mut parts)?;
                }
                _ => break,
            }
        }
        let span = start.to(self.prev_span());
        if !any_f {
            let text = match parts.pop() {
                Some(FPart::Text(t)) => t,
                _ => String::new(),
            };
            return Ok(Expr::new(ExprKind::Lit(Literal::Str(text)), span));
        }
        Ok(Expr::new(ExprKind::FString(parts), span))
    }
}

fn push_text(parts: &mut Vec<FPart>, s: &str) {
    if let Some(FPart::Text(t)) = parts.last_mut() {
        t.push_str(s);
    } else {
        parts.push(FPart::Text(s.to_string()));
    }
}

fn parse_fstring(raw: &str, content_pos: Pos, span: Span, parts: &mut Vec<FPart>) -> PResult<()> {
    let chars: Vec<char> = raw.chars().collect();
    let mut i = 0;
    let mut text = String::new();
    while i < chars.len() {
        let c = chars[i];
        if c == '{' {
            if chars.get(i + 1) == Some(&'{') {
                text.push('{');
                i += 2;
                continue;
            }
            let mut depth = 1;
            let mut j = i + 1;
            let mut quote: Option<char> = None;
            while j < chars.len() {
                let d = chars[j];
                match quote {
                    Some(q) if d == q => quote = None,
                    Some(_) => {}
                    None => match d {
                        '\'' | '"' => quote = Some(d),
                        '{' | '[' | '(' => depth += 1,
                        '}' | ']' | ')' => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    },
                }
                j += 1;
            }
            if j >= chars.len() {
                return Err(FrontendError::syntax(span, "unterminated f-string hole"));
            }
            let hole: String = chars[i + 1..j].iter().collect();
            if hole.trim().is_empty() {
                return Err(FrontendError::syntax(span, "empty f-string hole"));
            }
            if has_top_level(&hole, &[':', '!']) {
                return Err(FrontendError::unsupported(span, "f-string format specifier"));
            }
            let offset = Pos { line: content_pos.line, col: content_pos.col + i as u32 + 1 };
            let mut expr = parse_expression(&hole).map_err(|e| shift_error(e, offset))?;
            shift_expr(&mut expr, offset);
            if !text.is_empty() {
                push_text(parts, &std::mem::take(&mut text));
            }
            parts.push(FPart::Hole(expr));
            i = j + 1;
        } else if c == '}' {
            if chars.get(i + 1) == Some(&'}') {
                text.push('}');
                i += 2;
            } else {
                return Err(FrontendError::syntax(span, "single `}` is not allowed in f-string"));
            }
        } else {
            text.push(c);
            i += 1;
        }
    }
    if !text.is_empty() {
        push_text(parts, &text);
    }
    Ok(())
}

/// True if one of `chars` occurs outside brackets and quotes, ignoring `!=`.
fn has_top_level(s: &str, chars: &[char]) -> bool {
    let cs: Vec<char> = s.chars().collect();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    for (k, &c) in cs.iter().enumerate() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                _ if depth == 0 && chars.contains(&c) => {
                    if c == '!' && cs.get(k + 1) == Some(&'=') {
                        continue;
                    }
                    return true;
                }
                _ => {}
            },
        }
    }
    false
}

fn shift_pos(p: Pos, offset: Pos) -> Pos {
    if p.line == 1 {
        Pos { line: offset.line, col: p.col + offset.col - 1 }
    } else {
        Pos { line: p.line + offset.line - 1, col: p.col }
    }
}

fn shift_span(s: Span, offset: Pos) -> Span {
    Span::new(shift_pos(s.start, offset), shift_pos(s.end, offset))
}

fn shift_error(e: FrontendError, offset: Pos) -> FrontendError {
    match e {
        FrontendError::Syntax { span, message } => FrontendError::Syntax { span: shift_span(span, offset), message },
        FrontendError::Unsupported { span, construct } => FrontendError::Unsupported { span: shift_span(span, offset), construct },
        other => other,
    }
}

fn shift_expr(e: &mut Expr, offset: Pos) {
    e.span = shift_span(e.span, offset);
    match &mut e.kind {
        ExprKind::Name(_) | ExprKind::Lit(_) | ExprKind::Builtin(_) => {}
        ExprKind::FString(parts) => {
            for p in parts {
                if let FPart::Hole(h) = p {
                    shift_expr(h, offset);
                }
            }
        }
        ExprKind::Tuple(items) | ExprKind::Set(items) => items.iter_mut().for_each(|x| shift_expr(x, offset)),
        ExprKind::BoolOp { values, .. } => values.iter_mut().for_each(|x| shift_expr(x, offset)),
        ExprKind::Call { func, args } => {
            shift_expr(func, offset);
            args.iter_mut().for_each(|x| shift_expr(x, offset));
        }
        ExprKind::Attribute { value, .. } => shift_expr(value, offset),
        ExprKind::Subscript { value, index } => {
            shift_expr(value, offset);
            shift_expr(index, offset);
        }
        ExprKind::Unary { operand, .. } => shift_expr(operand, offset),
        ExprKind::Binary { left, right, .. } => {
            shift_expr(left, offset);
            shift_expr(right, offset);
        }
        ExprKind::Compare { left, rest } => {
            shift_expr(left, offset);
            rest.iter_mut().for_each(|(_, x)| shift_expr(x, offset));
        }
    }
}

fn aug_op(op: &str) -> Option<BinOp> {
    Some(match op {
        "+=" => BinOp::Add,
        "-=" => BinOp::Sub,
        "*=" => BinOp::Mul,
        "@=" => BinOp::MatMul,
        "/=" => BinOp::Div,
        "//=" => BinOp::FloorDiv,
        "%=" => BinOp::Mod,
        "**=" => BinOp::Pow,
        "<<=" => BinOp::LShift,
        ">>=" => BinOp::RShift,
        "&=" => BinOp::BitAnd,
        "|=" => BinOp::BitOr,
        "^=" => BinOp::BitXor,
        _ => return None,
    })
}

fn aug_op_tok(t: &Tok) -> bool {
    matches!(t, Tok::Op(o) if aug_op(o).is_some())
}

fn expr_to_target(e: Expr) -> PResult<Target> {
    let span = e.span;
    let kind = match e.kind {
        ExprKind::Name(n) => TargetKind::Name(n),
        ExprKind::Tuple(items) => {
            if items.is_empty() {
                return Err(FrontendError::syntax(span, "cannot assign to ()"));
            }
            TargetKind::Tuple(items.into_iter().map(expr_to_target).collect::<PResult<_>>()?)
        }
        ExprKind::Attribute { value, attr } => TargetKind::Attribute { value, attr },
        ExprKind::Subscript { value, index } => TargetKind::Subscript { value, index },
        _ => return Err(FrontendError::syntax(span, "cannot assign to expression")),
    };
    Ok(Target { kind, span })
}

const ROLE_DECORATORS: &[&str] = &["poppy", "sequential", "readonly", "unordered"];

fn validate_function(f: &SurfaceFunction, top_level: bool) -> PResult<()> {
    if !top_level {
        if let Some(d) = f.decorators.first() {
            return Err(FrontendError::unsupported(d.span, "decorator on nested function"));
        }
        if f.is_async {
            return Err(FrontendError::unsupported(f.span, "async internal function"));
        }
        return validate_internal_body(&f.body, true);
    }
    for d in &f.decorators {
        if !ROLE_DECORATORS.contains(&d.name.as_str()) {
            return Err(FrontendError::unsupported(d.span, format!("decorator @{}", d.name)));
        }
    }
    if f.is_internal() {
        let extra: Vec<&str> = f.decorators.iter().map(|d| d.name.as_str()).filter(|n| *n != "poppy").collect();
        if !extra.is_empty() || f.decorators.len() > 1 {
            return Err(FrontendError::ConflictingAnnotations {
                span: f.span,
                function: f.name.clone(),
                decorators: f.decorators.iter().map(|d| format!("@{}", d.name)).collect::<Vec<_>>().join(" "),
            });
        }
        if f.is_async {
            return Err(FrontendError::unsupported(f.span, "async internal function"));
        }
        validate_internal_body(&f.body, true)
    } else {
        super::annotation_of(f)?;
        let ok = f.body.len() == 1 && matches!(&f.body[0].kind, StmtKind::Expr(Expr { kind: ExprKind::Lit(Literal::Ellipsis), .. }));
        if !ok {
            let span = f.body.first().map(|s| s.span).unwrap_or(f.span);
            return Err(FrontendError::unsupported(span, "external function body other than `...`"));
        }
        Ok(())
    }
}

/// `return` only as the last statement of a function body.
pub(crate) fn validate_internal_body(body: &[Stmt], function_level: bool) -> PResult<()> {
    for (i, s) in body.iter().enumerate() {
        let last = i + 1 == body.len();
        match &s.kind {
            StmtKind::Return(_) if !(function_level && last) => {
                return Err(FrontendError::unsupported(s.span, "return (non-final)"));
            }
            StmtKind::If { then, orelse, .. } => {
                validate_internal_body(then, false)?;
                validate_internal_body(orelse, false)?;
            }
            StmtKind::For { body, .. } | StmtKind::While { body, .. } => validate_internal_body(body, false)?,
            _ => {}
        }
    }
    Ok(())
}
