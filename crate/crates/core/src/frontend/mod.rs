//! Source front end: tokenizer, parser, printer.

pub mod ast;
pub mod lexer;
mod parser;
pub mod printer;

pub use ast::*;
pub use printer::print_module;

use crate::control::Annotation;
use crate::error::FrontendError;

/// Parses a source file into a surface module.
pub fn parse_module(source: &str) -> Result<SurfaceModule, FrontendError> {
    parser::parse_source(source)
}

/// Parses a single expression. Used by tests and the f-string hole parser.
pub fn parse_expr(source: &str) -> Result<Expr, FrontendError> {
    parser::parse_expression(source)
}

/// The reordering annotation of an external function.
pub fn annotation_of(f: &SurfaceFunction) -> Result<Annotation, FrontendError> {
    let found: Vec<Annotation> = f
        .decorators
        .iter()
        .filter_map(|d| match d.name.as_str() {
            "sequential" => Some(Annotation::Sequential),
            "readonly" => Some(Annotation::ReadOnly),
            "unordered" => Some(Annotation::Unordered),
            _ => None,
        })
        .collect();
    match found.as_slice() {
        [] => Ok(Annotation::Sequential),
        [a] => Ok(*a),
        _ => Err(FrontendError::ConflictingAnnotations {
            span: f.span,
            function: f.name.clone(),
            decorators: f.decorators.iter().map(|d| format!("@{}", d.name)).collect::<Vec<_>>().join(" "),
        }),
    }
}

impl SurfaceModule {
    /// Copy with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> SurfaceModule {
        let mut m = self.clone();
        m.functions.iter_mut().for_each(strip_fn);
        m.module_level_statements.iter_mut().for_each(strip_stmt);
        m
    }
}

fn strip_fn(f: &mut SurfaceFunction) {
    f.span = Span::default();
    f.params.iter_mut().for_each(|p| p.span = Span::default());
    f.decorators.iter_mut().for_each(|d| d.span = Span::default());
    f.body.iter_mut().for_each(strip_stmt);
}

fn strip_stmt(s: &mut Stmt) {
    s.span = Span::default();
    match &mut s.kind {
        StmtKind::Assign { target, value } | StmtKind::AugAssign { target, value, .. } => {
            strip_target(target);
            strip_expr(value);
        }
        StmtKind::Expr(e) => strip_expr(e),
        StmtKind::If { cond, then, orelse } => {
            strip_expr(cond);
            then.iter_mut().for_each(strip_stmt);
            orelse.iter_mut().for_each(strip_stmt);
        }
        StmtKind::For { target, iter, body } => {
            strip_target(target);
            strip_expr(iter);
            body.iter_mut().for_each(strip_stmt);
        }
        StmtKind::While { cond, body } => {
            strip_expr(cond);
            body.iter_mut().for_each(strip_stmt);
        }
        StmtKind::FunctionDef(f) => strip_fn(f),
        StmtKind::Return(Some(e)) => strip_expr(e),
        StmtKind::Pass | StmtKind::Return(None) => {}
    }
}

fn strip_target(t: &mut Target) {
    t.span = Span::default();
    match &mut t.kind {
        TargetKind::Name(_) => {}
        TargetKind::Tuple(items) => items.iter_mut().for_each(strip_target),
        TargetKind::Attribute { value, .. } => strip_expr(value),
        TargetKind::Subscript { value, index } => {
            strip_expr(value);
            strip_expr(index);
        }
    }
}

fn strip_expr(e: &mut Expr) {
    e.span = Span::default();
    e.for_each_child_mut(&mut strip_expr);
}

impl Expr {
    pub fn for_each_child_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        match &mut self.kind {
            ExprKind::Name(_) | ExprKind::Lit(_) | ExprKind::Builtin(_) => {}
            ExprKind::FString(parts) => {
                for p in parts {
                    if let FPart::Hole(h) = p {
                        f(h);
                    }
                }
            }
            ExprKind::Tuple(items) | ExprKind::Set(items) | ExprKind::BoolOp { values: items, .. } => items.iter_mut().for_each(f),
            ExprKind::Call { func, args } => {
                f(func);
                args.iter_mut().for_each(f);
            }
            ExprKind::Attribute { value, .. } | ExprKind::Unary { operand: value, .. } => f(value),
            ExprKind::Subscript { value, index } => {
                f(value);
                f(index);
            }
            ExprKind::Binary { left, right, .. } => {
                f(left);
                f(right);
            }
            ExprKind::Compare { left, rest } => {
                f(left);
                rest.iter_mut().for_each(|(_, x)| f(x));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOT: &str = include_str!("../../tests/programs/tot_full.py");

    fn parse_err(src: &str) -> FrontendError {
        parse_module(src).expect_err("expected rejection")
    }

    #[test]
    fn tot_listing_roles() {
        let m = parse_module(TOT).unwrap();
        let internal: Vec<&str> = m.internal_functions().map(|f| f.name.as_str()).collect();
        assert_eq!(internal, ["tree_of_thoughts", "get_values", "llm_get_proposals", "llm_get_value"]);
        let external: Vec<&str> = m.external_functions().map(|f| f.name.as_str()).collect();
        assert_eq!(external, ["print", "llm"]);
        let llm = m.function("llm").unwrap();
        assert!(llm.is_async);
        assert_eq!(annotation_of(llm).unwrap(), Annotation::Unordered);
        assert_eq!(annotation_of(m.function("print").unwrap()).unwrap(), Annotation::Sequential);
        let StmtKind::Assign { value, .. } = &m.function("tree_of_thoughts").unwrap().body[0].kind else { panic!() };
        assert!(matches!(&value.kind, ExprKind::Tuple(items) if items.len() == 1));
    }

    #[test]
    fn minimal_function() {
        let m = parse_module("@poppy\ndef f():\n    return 1\n").unwrap();
        assert_eq!(m.functions.len(), 1);
        let body = &m.functions[0].body;
        assert_eq!(body.len(), 1);
        assert!(matches!(&body[0].kind, StmtKind::Return(Some(Expr { kind: ExprKind::Lit(Literal::Int(1)), .. }))));
    }

    #[test]
    fn break_rejected() {
        let e = parse_err("@poppy\ndef f():\n    for x in xs:\n        break\n");
        assert!(matches!(e, FrontendError::Unsupported { ref construct, .. } if construct == "break"), "{e}");
        assert_eq!(e.span().start.line, 4);
    }

    #[test]
    fn default_annotation_is_sequential() {
        let m = parse_module("def log(x): ...\n").unwrap();
        assert_eq!(annotation_of(&m.functions[0]).unwrap(), Annotation::Sequential);
    }

    #[test]
    fn conflicting_annotations() {
        let e = parse_err("@sequential\n@unordered\ndef f(x): ...\n");
        assert!(matches!(e, FrontendError::ConflictingAnnotations { .. }));
        let e = parse_err("@poppy\n@readonly\ndef f(x):\n    return x\n");
        assert!(matches!(e, FrontendError::ConflictingAnnotations { .. }));
    }

    #[test]
    fn unknown_decorator_rejected() {
        let e = parse_err("@cache\ndef f(x): ...\n");
        assert!(matches!(e, FrontendError::Unsupported { .. }));
    }

    #[test]
    fn external_body_must_be_ellipsis() {
        let e = parse_err("@sequential\ndef f(x):\n    return x\n");
        assert!(matches!(e, FrontendError::Unsupported { .. }));
    }

    #[test]
    fn early_return_rejected() {
        let e = parse_err("@poppy\ndef f(x):\n    if x:\n        return 1\n    return 2\n");
        assert!(matches!(e, FrontendError::Unsupported { ref construct, .. } if construct.starts_with("return")));
    }

    #[test]
    fn exclusion_list_witnesses() {
        let cases = [
            ("break", "    while x:\n        break\n"),
            ("continue", "    while x:\n        continue\n"),
            ("raise", "    raise x\n"),
            ("try", "    try:\n        pass\n    except:\n        pass\n"),
            ("lambda", "    y = lambda: 1\n"),
            ("class", "    class A:\n        pass\n"),
            ("comprehension", "    y = (a for a in x)\n"),
            ("comprehension", "    y = [a for a in x]\n"),
            ("generator", "    yield x\n"),
            ("global", "    global x\n"),
            ("nonlocal", "    nonlocal x\n"),
        ];
        for (name, body) in cases {
            let src = format!("@poppy\ndef f(x):\n{body}");
            let e = parse_err(&src);
            match e {
                FrontendError::Unsupported { ref construct, .. } => assert_eq!(construct, name, "{src}"),
                other => panic!("{src}: {other}"),
            }
        }
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_err("@poppy\ndef f(x):\n    y = (1,\n");
        assert!(e.span().start.line >= 3, "{e}");
        assert!(e.to_string().contains(':'));
    }

    #[test]
    fn fstring_holes_parse_as_expressions() {
        let e = parse_expr("f\"{idx}: {g(a, 'x')}\"").unwrap();
        let ExprKind::FString(parts) = e.kind else { panic!() };
        assert_eq!(parts.len(), 3);
        assert!(matches!(&parts[2], FPart::Hole(Expr { kind: ExprKind::Call { .. }, .. })));
    }

    #[test]
    fn elif_chain() {
        let m = parse_module(
            "@poppy\ndef f(x):\n    if x:\n        y = 1\n    elif x:\n        y = 2\n    else:\n        y = 3\n    return y\n",
        )
        .unwrap();
        let StmtKind::If { orelse, .. } = &m.functions[0].body[0].kind else { panic!() };
        assert!(matches!(&orelse[0].kind, StmtKind::If { orelse, .. } if orelse.len() == 1));
    }

    #[test]
    fn round_trip_tot() {
        let m = parse_module(TOT).unwrap();
        let printed = print_module(&m);
        let again = parse_module(&printed).unwrap();
        assert_eq!(m.without_spans(), again.without_spans());
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c ** -d").unwrap();
        assert_eq!(printer::expr_to_string(&e), "a + (b * (c ** (-d)))");
        let e = parse_expr("not a == b and c or d").unwrap();
        assert_eq!(printer::expr_to_string(&e), "((not (a == b)) and c) or d");
    }
}
