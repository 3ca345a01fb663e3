//! Recursive-descent parser over the token vector. Backtracking is only used
//! to tell `MEM<4>(a)` apart from a comparison.

use std::collections::HashSet;

use super::ast::*;
use super::error::{Diag, DiagKind, SpecError};
use super::lexer::{lex, Tok, Token};

const MAX_ERRORS: usize = 20;

const DEF_STARTS: &[&str] = &[
    "constant",
    "using",
    "function",
    "enumeration",
    "format",
    "register",
    "program",
    "memory",
    "instruction",
    "encoding",
    "assembly",
    "model",
    "micro",
    "import",
];

const UNSUPPORTED_DEFS: &[&str] = &[
    "exception",
    "alias",
    "application",
    "cache",
    "relocation",
    "forall",
    "process",
    "operation",
];

pub type PResult<T> = Result<T, Diag>;

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// `BinOp` parameters of the model body being parsed.
    op_params: HashSet<String>,
    errors: Vec<Diag>,
}

/// Parses a whole specification source.
pub fn parse_spec(text: &str) -> Result<SpecAst, SpecError> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks);
    let defs = p.defs_until_eof();
    if p.errors.is_empty() {
        Ok(SpecAst { defs })
    } else {
        Err(SpecError { diags: p.errors })
    }
}

fn err(span: Span, msg: impl Into<String>) -> Diag {
    Diag::new(DiagKind::Syntax, span, msg)
}

impl Parser {
    pub fn new(mut toks: Vec<Token>) -> Self {
        if !matches!(toks.last().map(|t| &t.tok), Some(Tok::Eof)) {
            let span = toks.last().map(|t| t.span).unwrap_or_default();
            toks.push(Token {
                tok: Tok::Eof,
                span,
            });
        }
        Parser {
            toks,
            pos: 0,
            op_params: HashSet::new(),
            errors: Vec::new(),
        }
    }

    pub fn with_op_params(mut self, ops: HashSet<String>) -> Self {
        self.op_params = ops;
        self
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i]
    }

    fn span(&self) -> Span {
        self.peek().span
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_punct(p)
    }

    fn at_kw(&self, k: &str) -> bool {
        self.peek().is_ident(k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.at_kw(k) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.at_punct(p) {
            Ok(self.next().span)
        } else {
            Err(err(
                self.span(),
                format!("expected `{p}`, found {}", self.peek().describe()),
            ))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Span> {
        if self.at_kw(k) {
            Ok(self.next().span)
        } else {
            Err(err(
                self.span(),
                format!("expected `{k}`, found {}", self.peek().describe()),
            ))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.next();
                Ok(Name::new(s, t.span))
            }
            _ => Err(err(
                t.span,
                format!("expected identifier, found {}", t.describe()),
            )),
        }
    }

    /// An identifier or a `$param` hole (not followed by `(`).
    fn name_or_hole(&mut self) -> PResult<Name> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Dollar(s) => {
                self.next();
                Ok(Name {
                    text: s,
                    span: t.span,
                    hole: true,
                })
            }
            _ => self.ident(),
        }
    }

    // ---------------------------------------------------------------- defs

    fn defs_until_eof(&mut self) -> Vec<Def> {
        let mut defs = Vec::new();
        while !self.at_eof() && self.errors.len() < MAX_ERRORS {
            match self.def() {
                Ok(d) => defs.push(d),
                Err(e) => {
                    self.errors.push(e);
                    self.resync();
                }
            }
        }
        defs
    }

    /// Definitions until a closing `}` (not consumed).
    pub fn defs_until_brace(&mut self) -> PResult<Vec<Def>> {
        let mut defs = Vec::new();
        while !self.at_punct("}") {
            if self.at_eof() {
                return Err(err(self.span(), "expected `}`, found end of input"));
            }
            defs.push(self.def()?);
        }
        Ok(defs)
    }

    fn resync(&mut self) {
        self.next();
        while !self.at_eof() {
            let t = self.peek();
            let starts = match &t.tok {
                Tok::Ident(s) => DEF_STARTS.contains(&s.as_str()) && t.span.col == 1,
                _ => false,
            };
            if starts {
                return;
            }
            self.next();
        }
    }

    fn annotations(&mut self) -> PResult<Vec<Annotation>> {
        let mut anns = Vec::new();
        while self.at_punct("[") {
            let span = self.next().span;
            let mut items = Vec::new();
            while !self.at_punct("]") {
                if self.at_eof() {
                    return Err(err(self.span(), "unterminated annotation"));
                }
                items.push(self.expr()?);
            }
            self.next();
            anns.push(Annotation { items, span });
        }
        Ok(anns)
    }

    pub fn def(&mut self) -> PResult<Def> {
        let annotations = self.annotations()?;
        let span = self.span();
        let t = self.peek().clone();
        let kind = match &t.tok {
            Tok::Dollar(_) => {
                if self.peek_at(1).is_punct("(") {
                    DefKind::Instantiate(self.macro_call()?)
                } else {
                    DefKind::Hole(self.name_or_hole()?)
                }
            }
            Tok::Ident(kw) => match kw.as_str() {
                "constant" => {
                    self.next();
                    let name = self.name_or_hole()?;
                    let ty = if self.eat_punct(":") {
                        Some(self.type_expr()?)
                    } else {
                        None
                    };
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    DefKind::Constant { name, ty, value }
                }
                "using" => {
                    self.next();
                    let name = self.name_or_hole()?;
                    self.expect_punct("=")?;
                    let ty = self.type_expr()?;
                    DefKind::Using { name, ty }
                }
                "function" => self.function_def()?,
                "enumeration" => self.enumeration_def()?,
                "format" => self.format_def()?,
                "register" => {
                    self.next();
                    if self.eat_kw("file") {
                        let name = self.name_or_hole()?;
                        self.expect_punct(":")?;
                        let index = self.type_expr()?;
                        self.expect_punct("->")?;
                        let elem = self.type_expr()?;
                        DefKind::RegisterFile { name, index, elem }
                    } else {
                        let name = self.name_or_hole()?;
                        self.expect_punct(":")?;
                        let ty = self.type_expr()?;
                        DefKind::Register { name, ty }
                    }
                }
                "program" => {
                    self.next();
                    self.expect_kw("counter")?;
                    let name = self.name_or_hole()?;
                    self.expect_punct(":")?;
                    let ty = self.type_expr()?;
                    DefKind::ProgramCounter { name, ty }
                }
                "memory" => {
                    self.next();
                    let name = self.name_or_hole()?;
                    self.expect_punct(":")?;
                    let addr = self.type_expr()?;
                    self.expect_punct("->")?;
                    let unit = self.type_expr()?;
                    DefKind::Memory { name, addr, unit }
                }
                "instruction" => {
                    if self.peek_at(1).is_ident("set") {
                        self.isa_def()?
                    } else {
                        self.next();
                        let name = self.name_or_hole()?;
                        self.expect_punct(":")?;
                        let format = self.name_or_hole()?;
                        self.expect_punct("=")?;
                        let body = self.stmt()?;
                        DefKind::Instruction { name, format, body }
                    }
                }
                "encoding" => {
                    self.next();
                    let name = self.name_or_hole()?;
                    self.expect_punct("=")?;
                    let items = self.enc_block()?;
                    DefKind::Encoding { name, items }
                }
                "assembly" => {
                    self.next();
                    let mut names = vec![self.name_or_hole()?];
                    while self.eat_punct(",") {
                        names.push(self.name_or_hole()?);
                    }
                    self.expect_punct("=")?;
                    let body = self.expr()?;
                    DefKind::Assembly { names, body }
                }
                "model" => DefKind::Model(Box::new(self.model_def()?)),
                "micro" => {
                    self.next();
                    if self.eat_kw("architecture") {
                        self.mia_def()?
                    } else if self.eat_kw("processor") {
                        self.processor_def()?
                    } else {
                        return Err(err(
                            self.span(),
                            "expected `architecture` or `processor` after `micro`",
                        ));
                    }
                }
                "import" => {
                    self.next();
                    let t = self.next();
                    match t.tok {
                        Tok::Str(s) => DefKind::Import(s),
                        _ => return Err(err(t.span, "expected file name string after `import`")),
                    }
                }
                other if UNSUPPORTED_DEFS.contains(&other) => {
                    return Err(Diag::new(
                        DiagKind::UnsupportedFeature,
                        span,
                        format!("`{other}` definitions are not supported"),
                    ));
                }
                other => {
                    return Err(err(span, format!("expected a definition, found `{other}`")));
                }
            },
            _ => {
                return Err(err(
                    span,
                    format!("expected a definition, found {}", t.describe()),
                ))
            }
        };
        Ok(Def {
            kind,
            annotations,
            span,
        })
    }

    fn isa_def(&mut self) -> PResult<DefKind> {
        self.expect_kw("instruction")?;
        self.expect_kw("set")?;
        self.expect_kw("architecture")?;
        let name = self.ident()?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let defs = self.defs_until_brace()?;
        self.expect_punct("}")?;
        Ok(DefKind::Isa { name, defs })
    }

    fn function_def(&mut self) -> PResult<DefKind> {
        self.expect_kw("function")?;
        let name = self.name_or_hole()?;
        let mut params = Vec::new();
        if self.eat_punct("(") {
            while !self.at_punct(")") {
                let p = self.ident()?;
                self.expect_punct(":")?;
                let t = self.type_expr()?;
                params.push((p, t));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct("->")?;
        let ret = self.type_expr()?;
        self.expect_punct("=")?;
        let body = self.expr()?;
        Ok(DefKind::Function {
            name,
            params,
            ret,
            body,
        })
    }

    fn enumeration_def(&mut self) -> PResult<DefKind> {
        self.expect_kw("enumeration")?;
        let name = self.name_or_hole()?;
        let ty = if self.eat_punct(":") {
            Some(self.type_expr()?)
        } else {
            None
        };
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let mut members = Vec::new();
        while !self.at_punct("}") {
            let m = self.ident()?;
            let v = if self.eat_punct("=") {
                Some(self.expr()?)
            } else {
                None
            };
            members.push((m, v));
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(DefKind::Enumeration { name, ty, members })
    }

    fn format_def(&mut self) -> PResult<DefKind> {
        self.expect_kw("format")?;
        let name = self.name_or_hole()?;
        self.expect_punct(":")?;
        let ty = self.type_expr()?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.at_punct("}") {
            items.push(self.format_item()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(DefKind::Format { name, ty, items })
    }

    fn format_item(&mut self) -> PResult<FormatItem> {
        if self.at_kw("predicate") && matches!(self.peek_at(1).tok, Tok::Ident(_)) {
            self.next();
            let name = self.ident()?;
            self.expect_punct("=")?;
            let body = self.expr()?;
            return Ok(FormatItem::Predicate { name, body });
        }
        if self.at_kw("encoding") && matches!(self.peek_at(1).tok, Tok::Ident(_)) {
            self.next();
            let name = self.ident()?;
            self.expect_punct("=")?;
            let items = self.enc_block()?;
            return Ok(FormatItem::Encoding { name, items });
        }
        let name = self.ident()?;
        if self.eat_punct("[") {
            let mut ranges = Vec::new();
            loop {
                let hi = self.small_int()?;
                let lo = if self.eat_punct("..") {
                    self.small_int()?
                } else {
                    hi
                };
                if lo > hi {
                    return Err(err(name.span, format!("field `{}` has range {hi}..{lo} with high below low", name.text)));
                }
                ranges.push((hi, lo));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("]")?;
            Ok(FormatItem::Field {
                name,
                shape: FieldShape::Ranges(ranges),
            })
        } else if self.eat_punct(":") {
            let ty = self.type_expr()?;
            Ok(FormatItem::Field {
                name,
                shape: FieldShape::Typed(ty),
            })
        } else if self.eat_punct("=") {
            let body = self.expr()?;
            Ok(FormatItem::Access { name, body })
        } else {
            Err(err(
                self.span(),
                format!("expected `[`, `:` or `=` after format item `{}`", name.text),
            ))
        }
    }

    fn small_int(&mut self) -> PResult<u32> {
        let t = self.next();
        match t.tok {
            Tok::Int { value, .. } if value < 1 << 16 => Ok(value as u32),
            _ => Err(err(t.span, format!("expected bit index, found {}", t.describe()))),
        }
    }

    fn enc_block(&mut self) -> PResult<Vec<EncItem>> {
        self.expect_punct("{")?;
        let items = self.enc_items_until_brace()?;
        self.expect_punct("}")?;
        Ok(items)
    }

    pub fn enc_items_until_brace(&mut self) -> PResult<Vec<EncItem>> {
        let mut items = Vec::new();
        while !self.at_punct("}") && !self.at_eof() {
            items.push(self.enc_item()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(items)
    }

    fn enc_item(&mut self) -> PResult<EncItem> {
        if let Tok::Dollar(_) = self.peek().tok {
            if self.peek_at(1).is_punct("(") {
                return Ok(EncItem::Instantiate(self.macro_call()?));
            }
            if !self.peek_at(1).is_punct("=") {
                return Ok(EncItem::Hole(self.name_or_hole()?));
            }
        }
        let name = self.name_or_hole()?;
        self.expect_punct("=")?;
        let value = self.expr()?;
        Ok(EncItem::Field { name, value })
    }

    fn model_def(&mut self) -> PResult<ModelDef> {
        self.expect_kw("model")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        while !self.at_punct(")") {
            let p = self.ident()?;
            self.expect_punct(":")?;
            let st = self.syntax_type()?;
            params.push((p, st));
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        self.expect_punct(":")?;
        let result = self.syntax_type()?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let saved = std::mem::take(&mut self.op_params);
        self.op_params = params
            .iter()
            .filter(|(_, t)| *t == SyntaxType::BinOp)
            .map(|(n, _)| n.text.clone())
            .collect();
        let body = self.model_body(result);
        self.op_params = saved;
        let body = body?;
        self.expect_punct("}")?;
        Ok(ModelDef {
            name,
            params,
            result,
            body,
        })
    }

    fn syntax_type(&mut self) -> PResult<SyntaxType> {
        let n = self.ident()?;
        SyntaxType::from_name(&n.text)
            .ok_or_else(|| err(n.span, format!("unknown syntax type `{}`", n.text)))
    }

    /// Body of a model (or a macro argument) of the given syntax type.
    pub fn model_body(&mut self, ty: SyntaxType) -> PResult<ModelBody> {
        Ok(match ty {
            SyntaxType::IsaDefs => ModelBody::Defs(self.defs_until_brace_or_eof()?),
            SyntaxType::Encs => ModelBody::Encs(self.enc_items_until_brace()?),
            SyntaxType::Stat => {
                let span = self.span();
                let mut stmts = Vec::new();
                while !self.at_punct("}") && !self.at_eof() {
                    stmts.push(self.stmt()?);
                }
                if stmts.len() == 1 {
                    ModelBody::Stmt(stmts.pop().unwrap())
                } else {
                    ModelBody::Stmt(Stmt {
                        kind: StmtKind::Block(stmts),
                        span,
                    })
                }
            }
            SyntaxType::Id => ModelBody::Name(self.name_or_hole()?),
            SyntaxType::BinOp => {
                let t = self.next();
                match &t.tok {
                    Tok::Punct(p) => match BinOp::from_symbol(p) {
                        Some(op) => ModelBody::Op(OpSym::Op(op)),
                        None => return Err(err(t.span, format!("`{p}` is not a binary operator"))),
                    },
                    Tok::Dollar(s) => ModelBody::Op(OpSym::Hole(Name {
                        text: s.clone(),
                        span: t.span,
                        hole: true,
                    })),
                    _ => return Err(err(t.span, format!("expected binary operator, found {}", t.describe()))),
                }
            }
            SyntaxType::Ex | SyntaxType::Bin | SyntaxType::CallEx => ModelBody::Expr(self.expr()?),
        })
    }

    fn defs_until_brace_or_eof(&mut self) -> PResult<Vec<Def>> {
        let mut defs = Vec::new();
        while !self.at_punct("}") && !self.at_eof() {
            defs.push(self.def()?);
        }
        Ok(defs)
    }

    /// `$Name(tokens ; tokens ; ...)`
    fn macro_call(&mut self) -> PResult<MacroCall> {
        let t = self.next();
        let model = match t.tok {
            Tok::Dollar(s) => Name::new(s, t.span),
            _ => return Err(err(t.span, "expected model instantiation")),
        };
        self.expect_punct("(")?;
        let mut args: Vec<Vec<Token>> = vec![Vec::new()];
        let mut depth = 0i32;
        loop {
            let tok = self.next();
            match &tok.tok {
                Tok::Eof => return Err(err(tok.span, "unterminated model instantiation")),
                Tok::Punct("(" | "{" | "[") => depth += 1,
                Tok::Punct(")") if depth == 0 => break,
                Tok::Punct(")" | "}" | "]") => depth -= 1,
                Tok::Punct(";") if depth == 0 => {
                    args.push(Vec::new());
                    continue;
                }
                _ => {}
            }
            args.last_mut().unwrap().push(tok);
        }
        if args.len() == 1 && args[0].is_empty() {
            args.clear();
        }
        Ok(MacroCall {
            model,
            args,
            span: t.span,
        })
    }

    fn mia_def(&mut self) -> PResult<DefKind> {
        let name = self.ident()?;
        self.expect_kw("implements")?;
        let isa = self.ident()?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.at_punct("}") {
            let anns = self.annotations()?;
            let span = self.span();
            if self.eat_kw("logic") {
                let name = self.ident()?;
                items.push(MiaItem::Logic {
                    name,
                    annotations: anns,
                    span,
                });
            } else if self.eat_kw("stage") {
                let name = self.ident()?;
                let mut outputs = Vec::new();
                if self.eat_punct("->") {
                    self.expect_punct("(")?;
                    while !self.at_punct(")") {
                        let o = self.ident()?;
                        self.expect_punct(":")?;
                        let t = self.type_expr()?;
                        outputs.push((o, t));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                }
                self.expect_punct("=")?;
                let body = self.stmt()?;
                items.push(MiaItem::Stage(StageDef {
                    name,
                    outputs,
                    body,
                    span,
                }));
            } else if self.at_eof() {
                return Err(err(self.span(), "expected `}`, found end of input"));
            } else {
                let t = self.peek().clone();
                let what = t.describe();
                let kind = match &t.tok {
                    Tok::Ident(s) if ["cache", "buffer", "signal", "register"].contains(&s.as_str()) => {
                        DiagKind::UnsupportedFeature
                    }
                    _ => DiagKind::Syntax,
                };
                return Err(Diag::new(
                    kind,
                    t.span,
                    format!("expected `stage` or `logic` in micro architecture, found {what}"),
                ));
            }
        }
        self.expect_punct("}")?;
        Ok(DefKind::Mia { name, isa, items })
    }

    fn processor_def(&mut self) -> PResult<DefKind> {
        let name = self.ident()?;
        self.expect_kw("implements")?;
        let isa = self.ident()?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.at_punct("}") {
            let key = self.ident()?;
            self.expect_punct("=")?;
            let value = self.expr()?;
            items.push((key, value));
        }
        self.expect_punct("}")?;
        Ok(DefKind::Processor { name, isa, items })
    }

    // --------------------------------------------------------------- types

    pub fn type_expr(&mut self) -> PResult<TypeExpr> {
        let span = self.span();
        let name = self.name_or_hole()?;
        // only the builtin types take a width, so `x as T < y` compares
        let sized = !name.hole && matches!(name.text.as_str(), "Bits" | "SInt" | "UInt");
        let arg = if sized && self.at_punct("<") {
            self.next();
            let e = self.binary(BinOp::Shl.precedence())?;
            self.expect_punct(">")?;
            Some(Box::new(e))
        } else {
            None
        };
        Ok(TypeExpr { name, arg, span })
    }

    // ---------------------------------------------------------- statements

    pub fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.eat_kw("let") {
            let name = self.ident()?;
            self.expect_punct("=")?;
            let value = self.expr()?;
            self.expect_kw("in")?;
            let body = self.stmt()?;
            return Ok(Stmt {
                kind: StmtKind::Let(name, value, Box::new(body)),
                span,
            });
        }
        if self.eat_kw("if") {
            let cond = self.expr()?;
            self.expect_kw("then")?;
            let then = self.stmt()?;
            let els = if self.eat_kw("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt {
                kind: StmtKind::If(cond, Box::new(then), els),
                span,
            });
        }
        if self.eat_kw("match") {
            let scrutinee = self.expr()?;
            self.expect_kw("with")?;
            self.expect_punct("{")?;
            let mut arms = Vec::new();
            let mut default = None;
            while !self.at_punct("}") {
                if self.at_kw("_") {
                    self.next();
                    self.expect_punct("=>")?;
                    default = Some(Box::new(self.stmt()?));
                } else {
                    let pats = self.match_patterns()?;
                    self.expect_punct("=>")?;
                    arms.push((pats, self.stmt()?));
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            return Ok(Stmt {
                kind: StmtKind::Match {
                    scrutinee,
                    arms,
                    default,
                },
                span,
            });
        }
        if self.at_punct("{") {
            self.next();
            let mut stmts = Vec::new();
            while !self.at_punct("}") {
                if self.at_eof() {
                    return Err(err(self.span(), "expected `}`, found end of input"));
                }
                stmts.push(self.stmt()?);
            }
            self.next();
            return Ok(Stmt {
                kind: StmtKind::Block(stmts),
                span,
            });
        }
        if self.eat_kw("raise") {
            let name = self.ident()?;
            return Ok(Stmt {
                kind: StmtKind::Raise(name),
                span,
            });
        }
        if self.at_kw("forall") || self.at_kw("lock") {
            return Err(Diag::new(
                DiagKind::UnsupportedFeature,
                span,
                format!("`{}` statements are not supported", match &self.peek().tok {
                    Tok::Ident(s) => s.clone(),
                    _ => unreachable!(),
                }),
            ));
        }
        if let Tok::Dollar(_) = self.peek().tok {
            if !self.peek_at(1).is_punct("(") && !self.peek_at(1).is_punct(":=") {
                let n = self.name_or_hole()?;
                return Ok(Stmt {
                    kind: StmtKind::Hole(n),
                    span,
                });
            }
        }
        let target = self.expr()?;
        if self.eat_punct(":=") {
            let value = self.expr()?;
            return Ok(Stmt {
                kind: StmtKind::Assign { target, value },
                span,
            });
        }
        let kind = match target.kind {
            ExprKind::Instantiate(m) => StmtKind::Instantiate(m),
            ExprKind::Method { .. } | ExprKind::Member(..) => StmtKind::Expr(target),
            _ => {
                return Err(err(
                    self.span(),
                    format!("expected `:=`, found {}", self.peek().describe()),
                ))
            }
        };
        Ok(Stmt { kind, span })
    }

    fn match_patterns(&mut self) -> PResult<Vec<Expr>> {
        let mut pats = vec![self.binary(BinOp::Or.precedence() + 1)?];
        while self.eat_punct("|") {
            pats.push(self.binary(BinOp::Or.precedence() + 1)?);
        }
        Ok(pats)
    }

    // --------------------------------------------------------- expressions

    pub fn expr(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat_kw("let") {
            let name = self.ident()?;
            self.expect_punct("=")?;
            let value = self.expr()?;
            self.expect_kw("in")?;
            let body = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::Let(name, Box::new(value), Box::new(body)),
                span,
            });
        }
        if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let a = self.expr()?;
            self.expect_kw("else")?;
            let b = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::If(Box::new(c), Box::new(a), Box::new(b)),
                span,
            });
        }
        if self.eat_kw("match") {
            let scrutinee = self.expr()?;
            self.expect_kw("with")?;
            self.expect_punct("{")?;
            let mut arms = Vec::new();
            let mut default = None;
            while !self.at_punct("}") {
                if self.at_kw("_") {
                    self.next();
                    self.expect_punct("=>")?;
                    default = Some(self.expr()?);
                } else {
                    let pats = self.match_patterns()?;
                    self.expect_punct("=>")?;
                    arms.push((pats, self.expr()?));
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            let default = default
                .ok_or_else(|| err(span, "match expression needs a `_` default arm"))?;
            return Ok(Expr {
                kind: ExprKind::Match {
                    scrutinee: Box::new(scrutinee),
                    arms,
                    default: Box::new(default),
                },
                span,
            });
        }
        self.binary(0)
    }

    fn binary_op_here(&self) -> Option<OpSym> {
        let t = self.peek();
        match &t.tok {
            Tok::Punct(p) => BinOp::from_symbol(p).map(OpSym::Op),
            Tok::Dollar(s) if self.op_params.contains(s) => Some(OpSym::Hole(Name {
                text: s.clone(),
                span: t.span,
                hole: true,
            })),
            _ => None,
        }
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op_here() {
            let prec = match &op {
                OpSym::Op(o) => o.precedence(),
                OpSym::Hole(_) => BinOp::Eq.precedence(),
            };
            if prec < min_prec {
                break;
            }
            self.next();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = if self.at_punct("-") {
            Some(UnOp::Neg)
        } else if self.at_punct("~") || self.at_punct("!") {
            Some(UnOp::Not)
        } else {
            None
        };
        if let Some(op) = op {
            self.next();
            let e = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(op, Box::new(e)),
                span,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_kw("as") {
                let t = self.type_expr()?;
                let span = e.span;
                e = Expr {
                    kind: ExprKind::Cast(Box::new(e), t),
                    span,
                };
            } else if self.at_punct(".") && matches!(self.peek_at(1).tok, Tok::Ident(_)) {
                self.next();
                let m = self.ident()?;
                let span = e.span;
                if self.at_punct("(") {
                    self.next();
                    let mut args = Vec::new();
                    while !self.at_punct(")") {
                        args.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                    e = Expr {
                        kind: ExprKind::Method {
                            recv: Box::new(e),
                            method: m,
                            args,
                        },
                        span,
                    };
                } else {
                    e = Expr {
                        kind: ExprKind::Member(Box::new(e), m),
                        span,
                    };
                }
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<Vec<Arg>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        while !self.at_punct(")") {
            let a = self.expr()?;
            if self.eat_punct("..") {
                let b = self.expr()?;
                args.push(Arg::Range(a, b));
            } else {
                args.push(Arg::Expr(a));
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    /// Tries `<size>(` after a name; restores the position on failure.
    fn try_sized_call(&mut self) -> Option<Box<Expr>> {
        let save = self.pos;
        let saved_errs = self.errors.len();
        self.next();
        let ok = match self.binary(BinOp::Shl.precedence()) {
            Ok(e) if self.at_punct(">") && self.peek_at(1).is_punct("(") => {
                self.next();
                Some(Box::new(e))
            }
            _ => None,
        };
        if ok.is_none() {
            self.pos = save;
            self.errors.truncate(saved_errs);
        }
        ok
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        let span = t.span;
        match t.tok {
            Tok::Int {
                value,
                radix,
                width,
            } => {
                self.next();
                Ok(Expr {
                    kind: ExprKind::Int {
                        value,
                        radix,
                        width,
                    },
                    span,
                })
            }
            Tok::Str(s) => {
                self.next();
                Ok(Expr {
                    kind: ExprKind::Str(s),
                    span,
                })
            }
            Tok::Punct("(") => {
                self.next();
                let mut items = vec![self.expr()?];
                while self.eat_punct(",") {
                    items.push(self.expr()?);
                }
                self.expect_punct(")")?;
                if items.len() == 1 {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Expr {
                        kind: ExprKind::Tuple(items),
                        span,
                    })
                }
            }
            Tok::Punct("@") => {
                self.next();
                let n = self.ident()?;
                Ok(Expr {
                    kind: ExprKind::Resource(n),
                    span,
                })
            }
            Tok::Dollar(_) => {
                if self.peek_at(1).is_punct("(") {
                    let m = self.macro_call()?;
                    Ok(Expr {
                        kind: ExprKind::Instantiate(m),
                        span,
                    })
                } else {
                    let n = self.name_or_hole()?;
                    self.after_name(n, span)
                }
            }
            Tok::Ident(ref s) if is_reserved(s) => Err(err(
                span,
                format!("expected expression, found keyword `{s}`"),
            )),
            Tok::Ident(_) => {
                let n = self.ident()?;
                if self.at_punct("::") {
                    self.next();
                    let m = self.ident()?;
                    return Ok(Expr {
                        kind: ExprKind::Path(n, m),
                        span,
                    });
                }
                self.after_name(n, span)
            }
            _ => Err(err(
                span,
                format!("expected expression, found {}", t.describe()),
            )),
        }
    }

    fn after_name(&mut self, n: Name, span: Span) -> PResult<Expr> {
        if self.at_punct("<") {
            if let Some(size) = self.try_sized_call() {
                let args = self.call_args()?;
                return Ok(Expr {
                    kind: ExprKind::Call {
                        callee: n,
                        size: Some(size),
                        args,
                    },
                    span,
                });
            }
        }
        if self.at_punct("(") {
            let args = self.call_args()?;
            return Ok(Expr {
                kind: ExprKind::Call {
                    callee: n,
                    size: None,
                    args,
                },
                span,
            });
        }
        Ok(Expr {
            kind: ExprKind::Name(n),
            span,
        })
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "then" | "else" | "in" | "with" | "as" | "let" | "if" | "match" | "instruction"
            | "encoding" | "assembly" | "format" | "model" | "constant" | "using"
    )
}
