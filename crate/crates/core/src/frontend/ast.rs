//! Surface syntax tree for the supported Python fragment.

use std::fmt;

/// A source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: Pos,
    pub end: Pos,
}

impl Span {
    pub fn new(start: Pos, end: Pos) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span { start: self.start, end: other.end }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start.line, self.start.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    Ellipsis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    MatMul,
    Div,
    FloorDiv,
    Mod,
    Pow,
    LShift,
    RShift,
    BitAnd,
    BitOr,
    BitXor,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::MatMul => "@",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
            BinOp::LShift => "<<",
            BinOp::RShift => ">>",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
        }
    }

    /// Name of the library operator the binary form desugars to.
    pub fn operator_name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::MatMul => "matmul",
            BinOp::Div => "truediv",
            BinOp::FloorDiv => "floordiv",
            BinOp::Mod => "mod",
            BinOp::Pow => "pow",
            BinOp::LShift => "lshift",
            BinOp::RShift => "rshift",
            BinOp::BitAnd => "and_",
            BinOp::BitOr => "or_",
            BinOp::BitXor => "xor",
        }
    }

    /// Name of the in-place operator an augmented assignment desugars to.
    pub fn inplace_name(self) -> &'static str {
        match self {
            BinOp::Add => "iadd",
            BinOp::Sub => "isub",
            BinOp::Mul => "imul",
            BinOp::MatMul => "imatmul",
            BinOp::Div => "itruediv",
            BinOp::FloorDiv => "ifloordiv",
            BinOp::Mod => "imod",
            BinOp::Pow => "ipow",
            BinOp::LShift => "ilshift",
            BinOp::RShift => "irshift",
            BinOp::BitAnd => "iand",
            BinOp::BitOr => "ior",
            BinOp::BitXor => "ixor",
        }
    }

    pub const ALL: [BinOp; 13] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::MatMul,
        BinOp::Div,
        BinOp::FloorDiv,
        BinOp::Mod,
        BinOp::Pow,
        BinOp::LShift,
        BinOp::RShift,
        BinOp::BitAnd,
        BinOp::BitOr,
        BinOp::BitXor,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Pos,
    Invert,
    Not,
}

impl UnaryOp {
    pub fn operator_name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Pos => "pos",
            UnaryOp::Invert => "invert",
            UnaryOp::Not => "not_",
        }
    }

    pub const ALL: [UnaryOp; 4] = [UnaryOp::Neg, UnaryOp::Pos, UnaryOp::Invert, UnaryOp::Not];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }

    pub fn operator_name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::NotEq => "ne",
            CmpOp::Lt => "lt",
            CmpOp::LtE => "le",
            CmpOp::Gt => "gt",
            CmpOp::GtE => "ge",
            CmpOp::Is => "is_",
            CmpOp::IsNot => "is_not",
            CmpOp::In => "contains",
            CmpOp::NotIn => "not_contains",
        }
    }

    pub const ALL: [CmpOp; 10] =
        [CmpOp::Eq, CmpOp::NotEq, CmpOp::Lt, CmpOp::LtE, CmpOp::Gt, CmpOp::GtE, CmpOp::Is, CmpOp::IsNot, CmpOp::In, CmpOp::NotIn];

    /// Membership tests take the container first once desugared.
    pub fn is_membership(self) -> bool {
        matches!(self, CmpOp::In | CmpOp::NotIn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOpKind {
    And,
    Or,
}

/// Where a name was resolved by scope elaboration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Resolution {
    /// A mutable variable declared in the given scope.
    Var(u32),
    /// A library or user-declared external, referenced directly.
    Builtin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Name {
    pub id: String,
    pub resolved: Option<Resolution>,
}

impl Name {
    pub fn new(id: impl Into<String>) -> Self {
        Name { id: id.into(), resolved: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FPart {
    Text(String),
    Hole(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(Name),
    Lit(Literal),
    FString(Vec<FPart>),
    Tuple(Vec<Expr>),
    Set(Vec<Expr>),
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
    },
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Compare {
        left: Box<Expr>,
        rest: Vec<(CmpOp, Expr)>,
    },
    BoolOp {
        op: BoolOpKind,
        values: Vec<Expr>,
    },
    /// Direct reference to a library operator, introduced by desugaring.
    Builtin(String),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn name(id: impl Into<String>, span: Span) -> Self {
        Expr::new(ExprKind::Name(Name::new(id)), span)
    }

    pub fn builtin_call(op: &str, args: Vec<Expr>, span: Span) -> Self {
        Expr::new(ExprKind::Call { func: Box::new(Expr::new(ExprKind::Builtin(op.to_string()), span)), args }, span)
    }

    /// True if evaluating the expression may run a call.
    pub fn contains_call(&self) -> bool {
        match &self.kind {
            ExprKind::Name(_) | ExprKind::Lit(_) | ExprKind::Builtin(_) => false,
            ExprKind::FString(parts) => parts.iter().any(|p| match p {
                FPart::Text(_) => false,
                FPart::Hole(_) => true,
            }),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub kind: TargetKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetKind {
    Name(Name),
    Tuple(Vec<Target>),
    Attribute { value: Box<Expr>, attr: String },
    Subscript { value: Box<Expr>, index: Box<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { target: Target, value: Expr },
    AugAssign { target: Target, op: BinOp, value: Expr },
    Expr(Expr),
    If { cond: Expr, then: Vec<Stmt>, orelse: Vec<Stmt> },
    For { target: Target, iter: Expr, body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    FunctionDef(SurfaceFunction),
    Pass,
    Return(Option<Expr>),
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decorator {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFunction {
    pub name: String,
    pub params: Vec<Param>,
    pub decorators: Vec<Decorator>,
    pub is_async: bool,
    pub body: Vec<Stmt>,
    pub span: Span,
    /// Scope id assigned by scope elaboration.
    pub scope: Option<u32>,
}

impl SurfaceFunction {
    pub fn is_internal(&self) -> bool {
        self.decorators.iter().any(|d| d.name == "poppy")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceModule {
    pub functions: Vec<SurfaceFunction>,
    pub module_level_statements: Vec<Stmt>,
}

impl SurfaceModule {
    pub fn function(&self, name: &str) -> Option<&SurfaceFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn internal_functions(&self) -> impl Iterator<Item = &SurfaceFunction> {
        self.functions.iter().filter(|f| f.is_internal())
    }

    pub fn external_functions(&self) -> impl Iterator<Item = &SurfaceFunction> {
        self.functions.iter().filter(|f| !f.is_internal())
    }
}
