//! Raw syntax tree. Model bodies keep their `$param` holes until expansion.

use std::fmt;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// An identifier, or a `$param` hole when `hole` is set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Name {
    pub text: String,
    pub span: Span,
    pub hole: bool,
}

impl Name {
    pub fn new(text: impl Into<String>, span: Span) -> Self {
        Name {
            text: text.into(),
            span,
            hole: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    MulWide,
    Div,
    Mod,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LogAnd,
    LogOr,
}

impl BinOp {
    pub fn from_symbol(s: &str) -> Option<BinOp> {
        use BinOp::*;
        Some(match s {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "*#" => MulWide,
            "/" => Div,
            "%" => Mod,
            "&" => And,
            "|" => Or,
            "^" => Xor,
            "<<" => Shl,
            ">>" => Shr,
            "=" => Eq,
            "!=" => Ne,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "&&" => LogAnd,
            "||" => LogOr,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            MulWide => "*#",
            Div => "/",
            Mod => "%",
            And => "&",
            Or => "|",
            Xor => "^",
            Shl => "<<",
            Shr => ">>",
            Eq => "=",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            LogAnd => "&&",
            LogOr => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        use BinOp::*;
        match self {
            LogOr => 1,
            LogAnd => 2,
            Or => 3,
            Xor => 4,
            And => 5,
            Eq | Ne => 6,
            Lt | Le | Gt | Ge => 7,
            Shl | Shr => 8,
            Add | Sub => 9,
            Mul | MulWide | Div | Mod => 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpSym {
    Op(BinOp),
    Hole(Name),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Radix {
    Bin,
    Dec,
    Hex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    /// `width` is the written digit width for binary and hex literals.
    Int {
        value: u128,
        radix: Radix,
        width: Option<u32>,
    },
    Str(String),
    Name(Name),
    /// `Enum::member`
    Path(Name, Name),
    /// `X(rs1)`, `f(a, b)`, `MEM<4>(a)`, `immS(12..1)`
    Call {
        callee: Name,
        size: Option<Box<Expr>>,
        args: Vec<Arg>,
    },
    Unary(UnOp, Box<Expr>),
    Binary(OpSym, Box<Expr>, Box<Expr>),
    Cast(Box<Expr>, TypeExpr),
    /// `(a, b, ...)` concatenation
    Tuple(Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Match {
        scrutinee: Box<Expr>,
        arms: Vec<(Vec<Expr>, Expr)>,
        default: Box<Expr>,
    },
    Let(Name, Box<Expr>, Box<Expr>),
    /// `a.b`, used in micro-architecture bodies.
    Member(Box<Expr>, Name),
    /// `a.m(args)`, used in micro-architecture bodies.
    Method {
        recv: Box<Expr>,
        method: Name,
        args: Vec<Expr>,
    },
    /// `@X`
    Resource(Name),
    Instantiate(MacroCall),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Expr(Expr),
    Range(Expr, Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeExpr {
    pub name: Name,
    pub arg: Option<Box<Expr>>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign { target: Expr, value: Expr },
    Let(Name, Expr, Box<Stmt>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    Match {
        scrutinee: Expr,
        arms: Vec<(Vec<Expr>, Stmt)>,
        default: Option<Box<Stmt>>,
    },
    Block(Vec<Stmt>),
    Raise(Name),
    Forall(Span),
    /// Expression statement (`instr.compute`).
    Expr(Expr),
    Hole(Name),
    Instantiate(MacroCall),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub items: Vec<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Def {
    pub kind: DefKind,
    pub annotations: Vec<Annotation>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncItem {
    Field { name: Name, value: Expr },
    Hole(Name),
    Instantiate(MacroCall),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldShape {
    Ranges(Vec<(u32, u32)>),
    Typed(TypeExpr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FormatItem {
    Field { name: Name, shape: FieldShape },
    Access { name: Name, body: Expr },
    Predicate { name: Name, body: Expr },
    Encoding { name: Name, items: Vec<EncItem> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageDef {
    pub name: Name,
    pub outputs: Vec<(Name, TypeExpr)>,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum MiaItem {
    Stage(StageDef),
    Logic {
        name: Name,
        annotations: Vec<Annotation>,
        span: Span,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DefKind {
    Constant {
        name: Name,
        ty: Option<TypeExpr>,
        value: Expr,
    },
    Using {
        name: Name,
        ty: TypeExpr,
    },
    Function {
        name: Name,
        params: Vec<(Name, TypeExpr)>,
        ret: TypeExpr,
        body: Expr,
    },
    Enumeration {
        name: Name,
        ty: Option<TypeExpr>,
        members: Vec<(Name, Option<Expr>)>,
    },
    Format {
        name: Name,
        ty: TypeExpr,
        items: Vec<FormatItem>,
    },
    Register {
        name: Name,
        ty: TypeExpr,
    },
    RegisterFile {
        name: Name,
        index: TypeExpr,
        elem: TypeExpr,
    },
    ProgramCounter {
        name: Name,
        ty: TypeExpr,
    },
    Memory {
        name: Name,
        addr: TypeExpr,
        unit: TypeExpr,
    },
    Instruction {
        name: Name,
        format: Name,
        body: Stmt,
    },
    Encoding {
        name: Name,
        items: Vec<EncItem>,
    },
    Assembly {
        names: Vec<Name>,
        body: Expr,
    },
    Model(Box<ModelDef>),
    Instantiate(MacroCall),
    /// A `$param` of type `IsaDefs` standing in for definitions.
    Hole(Name),
    Isa {
        name: Name,
        defs: Vec<Def>,
    },
    Mia {
        name: Name,
        isa: Name,
        items: Vec<MiaItem>,
    },
    Processor {
        name: Name,
        isa: Name,
        items: Vec<(Name, Expr)>,
    },
    Import(String),
}

impl DefKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            DefKind::Constant { .. } => "constant",
            DefKind::Using { .. } => "using",
            DefKind::Function { .. } => "function",
            DefKind::Enumeration { .. } => "enumeration",
            DefKind::Format { .. } => "format",
            DefKind::Register { .. } => "register",
            DefKind::RegisterFile { .. } => "register file",
            DefKind::ProgramCounter { .. } => "program counter",
            DefKind::Memory { .. } => "memory",
            DefKind::Instruction { .. } => "instruction",
            DefKind::Encoding { .. } => "encoding",
            DefKind::Assembly { .. } => "assembly",
            DefKind::Model(_) => "model",
            DefKind::Instantiate(_) => "instantiation",
            DefKind::Hole(_) => "hole",
            DefKind::Isa { .. } => "instruction set architecture",
            DefKind::Mia { .. } => "micro architecture",
            DefKind::Processor { .. } => "micro processor",
            DefKind::Import(_) => "import",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntaxType {
    Id,
    Ex,
    Stat,
    BinOp,
    Bin,
    IsaDefs,
    Encs,
    CallEx,
}

impl SyntaxType {
    pub fn from_name(s: &str) -> Option<SyntaxType> {
        use SyntaxType::*;
        Some(match s {
            "Id" => Id,
            "Ex" => Ex,
            "Stat" => Stat,
            "BinOp" => BinOp,
            "Bin" => Bin,
            "IsaDefs" => IsaDefs,
            "Encs" => Encs,
            "CallEx" => CallEx,
            _ => return None,
        })
    }

    /// Whether an argument of type `self` may fill a hole whose site expects `site`.
    pub fn fits(self, site: SyntaxType) -> bool {
        use SyntaxType::*;
        self == site
            || (site == Ex && matches!(self, Bin | Id | CallEx))
            || (site == CallEx && self == Id)
    }
}

impl fmt::Display for SyntaxType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelBody {
    Defs(Vec<Def>),
    Expr(Expr),
    Stmt(Stmt),
    Encs(Vec<EncItem>),
    Name(Name),
    Op(OpSym),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDef {
    pub name: Name,
    pub params: Vec<(Name, SyntaxType)>,
    pub result: SyntaxType,
    pub body: ModelBody,
}

/// `$Model(arg ; arg ; ...)`. Arguments stay as tokens until the parameter
/// types are known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacroCall {
    pub model: Name,
    pub args: Vec<Vec<super::lexer::Token>>,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpecAst {
    pub defs: Vec<Def>,
}

impl SpecAst {
    /// All definitions, descending into ISA bodies.
    pub fn walk_defs(&self) -> Vec<&Def> {
        fn go<'a>(defs: &'a [Def], out: &mut Vec<&'a Def>) {
            for d in defs {
                out.push(d);
                if let DefKind::Isa { defs, .. } = &d.kind {
                    go(defs, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.defs, &mut out);
        out
    }

    pub fn count(&self, keyword: &str) -> usize {
        self.walk_defs()
            .iter()
            .filter(|d| d.kind.keyword() == keyword)
            .count()
    }
}
