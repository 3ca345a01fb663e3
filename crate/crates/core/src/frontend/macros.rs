//! Syntactic `model` expansion.
//!
//! Models are registered in definition order and may only instantiate models
//! defined before them, which rules out recursion. Arguments are kept as
//! tokens at the call site and parsed once the parameter types are known.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::error::{Diag, DiagKind, SpecError};
use super::lexer::{Tok, Token};
use super::parser::Parser;

/// Callbacks for [`walk_defs`] and friends. Defaults leave the tree alone.
trait Hooks {
    fn name_hole(&mut self, _n: &mut Name, _site: SyntaxType) {}
    fn expr_hole(&mut self, _e: &mut Expr, _site: SyntaxType) {}
    fn op_hole(&mut self, _op: &mut OpSym) {}
    fn stmt_hole(&mut self, _s: &mut Stmt) {}
    fn defs_hole(&mut self, _n: &Name) -> Option<Vec<Def>> {
        None
    }
    fn encs_hole(&mut self, _n: &Name) -> Option<Vec<EncItem>> {
        None
    }
    fn call_tokens(&mut self, _c: &mut MacroCall) {}
    fn inst_expr(&mut self, _c: &MacroCall) -> Option<Expr> {
        None
    }
    fn inst_stmt(&mut self, _c: &MacroCall) -> Option<Stmt> {
        None
    }
    fn inst_defs(&mut self, _c: &MacroCall) -> Option<Vec<Def>> {
        None
    }
    fn inst_encs(&mut self, _c: &MacroCall) -> Option<Vec<EncItem>> {
        None
    }
    /// Returns true if the definition should be dropped.
    fn model_def(&mut self, _m: &ModelDef, _span: Span) -> bool {
        false
    }
}

fn walk_name<H: Hooks>(h: &mut H, n: &mut Name) {
    if n.hole {
        h.name_hole(n, SyntaxType::Id);
    }
}

fn walk_type<H: Hooks>(h: &mut H, t: &mut TypeExpr) {
    walk_name(h, &mut t.name);
    if let Some(a) = &mut t.arg {
        walk_expr(h, a);
    }
}

fn walk_expr_site<H: Hooks>(h: &mut H, e: &mut Expr, site: SyntaxType) {
    if let ExprKind::Name(n) = &e.kind {
        if n.hole {
            h.expr_hole(e, site);
            return;
        }
    }
    walk_expr(h, e);
}

fn walk_expr<H: Hooks>(h: &mut H, e: &mut Expr) {
    match &mut e.kind {
        ExprKind::Int { .. } | ExprKind::Str(_) => {}
        ExprKind::Name(n) => {
            if n.hole {
                h.expr_hole(e, SyntaxType::Ex);
            }
        }
        ExprKind::Path(a, b) => {
            walk_name(h, a);
            walk_name(h, b);
        }
        ExprKind::Call { callee, size, args } => {
            walk_name(h, callee);
            if let Some(s) = size {
                walk_expr(h, s);
            }
            for a in args {
                match a {
                    Arg::Expr(x) => walk_expr(h, x),
                    Arg::Range(x, y) => {
                        walk_expr(h, x);
                        walk_expr(h, y);
                    }
                }
            }
        }
        ExprKind::Unary(_, x) => walk_expr(h, x),
        ExprKind::Binary(op, a, b) => {
            if let OpSym::Hole(_) = op {
                h.op_hole(op);
            }
            walk_expr(h, a);
            walk_expr(h, b);
        }
        ExprKind::Cast(x, t) => {
            walk_expr(h, x);
            walk_type(h, t);
        }
        ExprKind::Tuple(xs) => xs.iter_mut().for_each(|x| walk_expr(h, x)),
        ExprKind::If(c, a, b) => {
            walk_expr(h, c);
            walk_expr(h, a);
            walk_expr(h, b);
        }
        ExprKind::Match {
            scrutinee,
            arms,
            default,
        } => {
            walk_expr(h, scrutinee);
            for (pats, body) in arms {
                pats.iter_mut().for_each(|p| walk_expr(h, p));
                walk_expr(h, body);
            }
            walk_expr(h, default);
        }
        ExprKind::Let(n, v, b) => {
            walk_name(h, n);
            walk_expr(h, v);
            walk_expr(h, b);
        }
        ExprKind::Member(x, n) => {
            walk_expr(h, x);
            walk_name(h, n);
        }
        ExprKind::Method { recv, method, args } => {
            walk_expr(h, recv);
            walk_name(h, method);
            args.iter_mut().for_each(|x| walk_expr(h, x));
        }
        ExprKind::Resource(n) => walk_name(h, n),
        ExprKind::Instantiate(c) => {
            h.call_tokens(c);
            let c = c.clone();
            if let Some(new) = h.inst_expr(&c) {
                *e = new;
            }
        }
    }
}

fn walk_stmt<H: Hooks>(h: &mut H, s: &mut Stmt) {
    match &mut s.kind {
        StmtKind::Assign { target, value } => {
            walk_expr_site(h, target, SyntaxType::CallEx);
            walk_expr(h, value);
        }
        StmtKind::Let(n, v, b) => {
            walk_name(h, n);
            walk_expr(h, v);
            walk_stmt(h, b);
        }
        StmtKind::If(c, a, b) => {
            walk_expr(h, c);
            walk_stmt(h, a);
            if let Some(b) = b {
                walk_stmt(h, b);
            }
        }
        StmtKind::Match {
            scrutinee,
            arms,
            default,
        } => {
            walk_expr(h, scrutinee);
            for (pats, body) in arms {
                pats.iter_mut().for_each(|p| walk_expr(h, p));
                walk_stmt(h, body);
            }
            if let Some(d) = default {
                walk_stmt(h, d);
            }
        }
        StmtKind::Block(ss) => ss.iter_mut().for_each(|x| walk_stmt(h, x)),
        StmtKind::Raise(n) => walk_name(h, n),
        StmtKind::Forall(_) => {}
        StmtKind::Expr(e) => walk_expr(h, e),
        StmtKind::Hole(_) => h.stmt_hole(s),
        StmtKind::Instantiate(c) => {
            h.call_tokens(c);
            let c = c.clone();
            if let Some(new) = h.inst_stmt(&c) {
                *s = new;
            }
        }
    }
}

fn walk_encs<H: Hooks>(h: &mut H, items: &mut Vec<EncItem>) {
    let mut out = Vec::with_capacity(items.len());
    for mut item in std::mem::take(items) {
        match &mut item {
            EncItem::Field { name, value } => {
                walk_name(h, name);
                walk_expr(h, value);
                out.push(item);
            }
            EncItem::Hole(n) => match h.encs_hole(n) {
                Some(new) => out.extend(new),
                None => out.push(item),
            },
            EncItem::Instantiate(c) => {
                h.call_tokens(c);
                let c = c.clone();
                match h.inst_encs(&c) {
                    Some(new) => out.extend(new),
                    None => out.push(EncItem::Instantiate(c)),
                }
            }
        }
    }
    *items = out;
}

fn walk_defs<H: Hooks>(h: &mut H, defs: &mut Vec<Def>) {
    let mut out = Vec::with_capacity(defs.len());
    for mut d in std::mem::take(defs) {
        match &mut d.kind {
            DefKind::Hole(n) => match h.defs_hole(n) {
                Some(new) => out.extend(new),
                None => out.push(d),
            },
            DefKind::Instantiate(c) => {
                h.call_tokens(c);
                let c = c.clone();
                match h.inst_defs(&c) {
                    Some(new) => out.extend(new),
                    None => {
                        d.kind = DefKind::Instantiate(c);
                        out.push(d)
                    }
                }
            }
            DefKind::Model(m) => {
                let m = (**m).clone();
                if !h.model_def(&m, d.span) {
                    out.push(d);
                }
            }
            _ => {
                walk_def(h, &mut d);
                out.push(d);
            }
        }
    }
    *defs = out;
}

fn walk_def<H: Hooks>(h: &mut H, d: &mut Def) {
    for a in &mut d.annotations {
        a.items.iter_mut().for_each(|x| walk_expr(h, x));
    }
    match &mut d.kind {
        DefKind::Constant { name, ty, value } => {
            walk_name(h, name);
            if let Some(t) = ty {
                walk_type(h, t);
            }
            walk_expr(h, value);
        }
        DefKind::Using { name, ty } => {
            walk_name(h, name);
            walk_type(h, ty);
        }
        DefKind::Function {
            name,
            params,
            ret,
            body,
        } => {
            walk_name(h, name);
            for (p, t) in params {
                walk_name(h, p);
                walk_type(h, t);
            }
            walk_type(h, ret);
            walk_expr(h, body);
        }
        DefKind::Enumeration { name, ty, members } => {
            walk_name(h, name);
            if let Some(t) = ty {
                walk_type(h, t);
            }
            for (_, v) in members {
                if let Some(v) = v {
                    walk_expr(h, v);
                }
            }
        }
        DefKind::Format { name, ty, items } => {
            walk_name(h, name);
            walk_type(h, ty);
            for it in items {
                match it {
                    FormatItem::Field { name, shape } => {
                        walk_name(h, name);
                        if let FieldShape::Typed(t) = shape {
                            walk_type(h, t);
                        }
                    }
                    FormatItem::Access { name, body } | FormatItem::Predicate { name, body } => {
                        walk_name(h, name);
                        walk_expr(h, body);
                    }
                    FormatItem::Encoding { name, items } => {
                        walk_name(h, name);
                        walk_encs(h, items);
                    }
                }
            }
        }
        DefKind::Register { name, ty } | DefKind::ProgramCounter { name, ty } => {
            walk_name(h, name);
            walk_type(h, ty);
        }
        DefKind::RegisterFile { name, index, elem } => {
            walk_name(h, name);
            walk_type(h, index);
            walk_type(h, elem);
        }
        DefKind::Memory { name, addr, unit } => {
            walk_name(h, name);
            walk_type(h, addr);
            walk_type(h, unit);
        }
        DefKind::Instruction { name, format, body } => {
            walk_name(h, name);
            walk_name(h, format);
            walk_stmt(h, body);
        }
        DefKind::Encoding { name, items } => {
            walk_name(h, name);
            walk_encs(h, items);
        }
        DefKind::Assembly { names, body } => {
            names.iter_mut().for_each(|n| walk_name(h, n));
            walk_expr(h, body);
        }
        DefKind::Isa { defs, .. } => walk_defs(h, defs),
        DefKind::Mia { items, .. } => {
            for it in items {
                if let MiaItem::Stage(s) = it {
                    walk_stmt(h, &mut s.body);
                }
            }
        }
        DefKind::Processor { items, .. } => items.iter_mut().for_each(|(_, e)| walk_expr(h, e)),
        DefKind::Model(_) | DefKind::Instantiate(_) | DefKind::Hole(_) | DefKind::Import(_) => {}
    }
}

fn walk_body<H: Hooks>(h: &mut H, body: &mut ModelBody) {
    match body {
        ModelBody::Defs(d) => walk_defs(h, d),
        ModelBody::Expr(e) => walk_expr(h, e),
        ModelBody::Stmt(s) => walk_stmt(h, s),
        ModelBody::Encs(e) => walk_encs(h, e),
        ModelBody::Name(n) => walk_name(h, n),
        ModelBody::Op(op) => {
            if let OpSym::Hole(_) = op {
                h.op_hole(op)
            }
        }
    }
}

// ------------------------------------------------------------ hole checking

struct Checker<'a> {
    params: &'a HashMap<String, SyntaxType>,
    known_models: &'a HashSet<String>,
    model: &'a str,
    errors: Vec<Diag>,
}

impl Checker<'_> {
    fn check(&mut self, n: &Name, site: SyntaxType) {
        match self.params.get(&n.text) {
            None => self.errors.push(Diag::new(
                DiagKind::MacroType,
                n.span,
                format!("`${}` is not a parameter of model `{}`", n.text, self.model),
            )),
            Some(t) if !t.fits(site) => self.errors.push(Diag::new(
                DiagKind::MacroType,
                n.span,
                format!(
                    "parameter `${}` has syntax type {t} but is used where {site} is expected",
                    n.text
                ),
            )),
            _ => {}
        }
    }

    fn callee(&mut self, c: &MacroCall) {
        if !self.known_models.contains(&c.model.text) {
            let msg = if c.model.text == self.model {
                format!("model `{}` instantiates itself; recursive models are not allowed", self.model)
            } else {
                format!("model `{}` is not defined before `{}`", c.model.text, self.model)
            };
            self.errors
                .push(Diag::new(DiagKind::UnknownModel, c.model.span, msg));
        }
        for arg in &c.args {
            for t in arg {
                if let Tok::Dollar(p) = &t.tok {
                    if !self.params.contains_key(p) && !self.known_models.contains(p) {
                        self.errors.push(Diag::new(
                            DiagKind::MacroType,
                            t.span,
                            format!("`${p}` is not a parameter of model `{}`", self.model),
                        ));
                    }
                }
            }
        }
    }
}

impl Hooks for Checker<'_> {
    fn name_hole(&mut self, n: &mut Name, site: SyntaxType) {
        let n = n.clone();
        self.check(&n, site);
    }
    fn expr_hole(&mut self, e: &mut Expr, site: SyntaxType) {
        if let ExprKind::Name(n) = &e.kind {
            let n = n.clone();
            self.check(&n, site);
        }
    }
    fn op_hole(&mut self, op: &mut OpSym) {
        if let OpSym::Hole(n) = op {
            let n = n.clone();
            self.check(&n, SyntaxType::BinOp);
        }
    }
    fn stmt_hole(&mut self, s: &mut Stmt) {
        if let StmtKind::Hole(n) = &s.kind {
            let n = n.clone();
            self.check(&n, SyntaxType::Stat);
        }
    }
    fn defs_hole(&mut self, n: &Name) -> Option<Vec<Def>> {
        self.check(n, SyntaxType::IsaDefs);
        None
    }
    fn encs_hole(&mut self, n: &Name) -> Option<Vec<EncItem>> {
        self.check(n, SyntaxType::Encs);
        None
    }
    fn call_tokens(&mut self, c: &mut MacroCall) {
        let c = c.clone();
        self.callee(&c);
    }
    fn model_def(&mut self, m: &ModelDef, span: Span) -> bool {
        self.errors.push(Diag::new(
            DiagKind::UnsupportedFeature,
            span,
            format!("model `{}` is defined inside another model", m.name.text),
        ));
        false
    }
}

// ------------------------------------------------------------- substitution

#[derive(Clone, Debug)]
enum Frag {
    Name(Name),
    Expr(Expr),
    Op(BinOp),
    Stmt(Stmt),
    Defs(Vec<Def>),
    Encs(Vec<EncItem>),
}

struct Subst<'a> {
    args: &'a HashMap<String, (Frag, Vec<Token>)>,
}

impl Hooks for Subst<'_> {
    fn name_hole(&mut self, n: &mut Name, _site: SyntaxType) {
        match self.args.get(&n.text) {
            Some((Frag::Name(a), _)) => *n = a.clone(),
            Some((Frag::Expr(Expr { kind: ExprKind::Name(a), .. }), _)) => *n = a.clone(),
            _ => {}
        }
    }
    fn expr_hole(&mut self, e: &mut Expr, _site: SyntaxType) {
        let ExprKind::Name(n) = &e.kind else { return };
        match self.args.get(&n.text) {
            Some((Frag::Name(a), _)) => {
                *e = Expr {
                    kind: ExprKind::Name(a.clone()),
                    span: a.span,
                }
            }
            Some((Frag::Expr(x), _)) => *e = x.clone(),
            _ => {}
        }
    }
    fn op_hole(&mut self, op: &mut OpSym) {
        if let OpSym::Hole(n) = op {
            if let Some((Frag::Op(o), _)) = self.args.get(&n.text) {
                *op = OpSym::Op(*o);
            }
        }
    }
    fn stmt_hole(&mut self, s: &mut Stmt) {
        if let StmtKind::Hole(n) = &s.kind {
            if let Some((Frag::Stmt(x), _)) = self.args.get(&n.text) {
                *s = x.clone();
            }
        }
    }
    fn defs_hole(&mut self, n: &Name) -> Option<Vec<Def>> {
        match self.args.get(&n.text) {
            Some((Frag::Defs(d), _)) => Some(d.clone()),
            _ => None,
        }
    }
    fn encs_hole(&mut self, n: &Name) -> Option<Vec<EncItem>> {
        match self.args.get(&n.text) {
            Some((Frag::Encs(d), _)) => Some(d.clone()),
            _ => None,
        }
    }
    fn call_tokens(&mut self, c: &mut MacroCall) {
        for arg in &mut c.args {
            let mut out = Vec::with_capacity(arg.len());
            for t in arg.drain(..) {
                match &t.tok {
                    Tok::Dollar(p) if self.args.contains_key(p) => {
                        out.extend(self.args[p].1.iter().cloned())
                    }
                    _ => out.push(t),
                }
            }
            *arg = out;
        }
    }
}

// ---------------------------------------------------------------- expansion

struct Expander {
    models: HashMap<String, ModelDef>,
    errors: Vec<Diag>,
    depth: usize,
}

const MAX_DEPTH: usize = 64;

impl Expander {
    fn register(&mut self, m: &ModelDef) {
        if self.models.contains_key(&m.name.text) {
            self.errors.push(Diag::new(
                DiagKind::Name,
                m.name.span,
                format!("model `{}` is defined twice", m.name.text),
            ));
            return;
        }
        let mut seen = HashSet::new();
        for (p, _) in &m.params {
            if !seen.insert(p.text.clone()) {
                self.errors.push(Diag::new(
                    DiagKind::Name,
                    p.span,
                    format!("parameter `{}` is declared twice", p.text),
                ));
            }
        }
        let params: HashMap<String, SyntaxType> =
            m.params.iter().map(|(n, t)| (n.text.clone(), *t)).collect();
        let known: HashSet<String> = self.models.keys().cloned().collect();
        let mut checker = Checker {
            params: &params,
            known_models: &known,
            model: &m.name.text,
            errors: Vec::new(),
        };
        let mut body = m.body.clone();
        walk_body(&mut checker, &mut body);
        let errs = checker.errors;
        let ok = errs.is_empty();
        self.errors.extend(errs);
        if ok {
            self.models.insert(m.name.text.clone(), m.clone());
        }
    }

    fn parse_arg(
        &self,
        call: &MacroCall,
        idx: usize,
        ty: SyntaxType,
        toks: &[Token],
    ) -> Result<Frag, Diag> {
        let span = toks.first().map(|t| t.span).unwrap_or(call.span);
        let mismatch = |found: &str| {
            Diag::new(
                DiagKind::MacroType,
                span,
                format!(
                    "argument {} of `${}` must be {ty}, found {found}",
                    idx + 1,
                    call.model.text
                ),
            )
        };
        match ty {
            SyntaxType::Id => match toks {
                [Token {
                    tok: Tok::Ident(s),
                    span,
                }] => Ok(Frag::Name(Name::new(s.clone(), *span))),
                [] => Err(mismatch("nothing")),
                _ => Err(mismatch("an expression")),
            },
            SyntaxType::BinOp => match toks {
                [Token {
                    tok: Tok::Punct(p), ..
                }] if BinOp::from_symbol(p).is_some() => Ok(Frag::Op(BinOp::from_symbol(p).unwrap())),
                _ => Err(mismatch("something other than a binary operator")),
            },
            SyntaxType::Bin => match toks {
                [Token {
                    tok:
                        Tok::Int {
                            value,
                            radix: Radix::Bin,
                            width,
                        },
                    span,
                }] => Ok(Frag::Expr(Expr {
                    kind: ExprKind::Int {
                        value: *value,
                        radix: Radix::Bin,
                        width: *width,
                    },
                    span: *span,
                })),
                _ => Err(mismatch("something other than a binary literal")),
            },
            _ => {
                let mut p = Parser::new(toks.to_vec());
                let parsed = p.model_body(ty).map_err(|mut d| {
                    d.kind = DiagKind::MacroType;
                    d.message = format!(
                        "argument {} of `${}` is not a valid {ty}: {}",
                        idx + 1,
                        call.model.text,
                        d.message
                    );
                    d
                })?;
                if !p.at_eof() {
                    return Err(mismatch("extra tokens"));
                }
                Ok(match parsed {
                    ModelBody::Defs(d) => Frag::Defs(d),
                    ModelBody::Encs(e) => Frag::Encs(e),
                    ModelBody::Stmt(s) => Frag::Stmt(s),
                    ModelBody::Expr(e) => {
                        if ty == SyntaxType::CallEx
                            && !matches!(e.kind, ExprKind::Name(_) | ExprKind::Call { .. })
                        {
                            return Err(mismatch("an expression that is not a name or call"));
                        }
                        Frag::Expr(e)
                    }
                    ModelBody::Name(n) => Frag::Name(n),
                    ModelBody::Op(OpSym::Op(o)) => Frag::Op(o),
                    ModelBody::Op(OpSym::Hole(_)) => return Err(mismatch("a hole")),
                })
            }
        }
    }

    /// Expands one instantiation into its (still possibly nested) body.
    fn instantiate(&mut self, call: &MacroCall, want: SyntaxType) -> Option<ModelBody> {
        let Some(model) = self.models.get(&call.model.text).cloned() else {
            self.errors.push(Diag::new(
                DiagKind::UnknownModel,
                call.model.span,
                format!("model `{}` is not defined", call.model.text),
            ));
            return None;
        };
        if !model.result.fits(want) {
            self.errors.push(Diag::new(
                DiagKind::MacroType,
                call.span,
                format!(
                    "model `{}` produces {} but {want} is expected here",
                    model.name.text, model.result
                ),
            ));
            return None;
        }
        if call.args.len() != model.params.len() {
            self.errors.push(Diag::new(
                DiagKind::MacroType,
                call.span,
                format!(
                    "model `{}` takes {} arguments, {} given",
                    model.name.text,
                    model.params.len(),
                    call.args.len()
                ),
            ));
            return None;
        }
        if self.depth >= MAX_DEPTH {
            self.errors.push(Diag::new(
                DiagKind::MacroType,
                call.span,
                "model instantiation nested too deeply",
            ));
            return None;
        }
        let mut args = HashMap::new();
        let mut failed = false;
        for (i, ((pname, pty), toks)) in model.params.iter().zip(&call.args).enumerate() {
            match self.parse_arg(call, i, *pty, toks) {
                Ok(f) => {
                    // keep grouping when the tokens are pasted into a nested call
                    let pasted = if matches!(pty, SyntaxType::Ex | SyntaxType::CallEx)
                        && toks.len() > 1
                    {
                        let span = toks[0].span;
                        let mut v = vec![Token {
                            tok: Tok::Punct("("),
                            span,
                        }];
                        v.extend(toks.iter().cloned());
                        v.push(Token {
                            tok: Tok::Punct(")"),
                            span,
                        });
                        v
                    } else {
                        toks.clone()
                    };
                    args.insert(pname.text.clone(), (f, pasted));
                }
                Err(d) => {
                    self.errors.push(d);
                    failed = true;
                }
            }
        }
        if failed {
            return None;
        }
        let mut body = model.body.clone();
        walk_body(&mut Subst { args: &args }, &mut body);
        self.depth += 1;
        walk_body(self, &mut body);
        self.depth -= 1;
        Some(body)
    }
}

impl Hooks for Expander {
    fn inst_expr(&mut self, c: &MacroCall) -> Option<Expr> {
        match self.instantiate(c, SyntaxType::Ex)? {
            ModelBody::Expr(e) => Some(e),
            ModelBody::Name(n) => Some(Expr {
                span: n.span,
                kind: ExprKind::Name(n),
            }),
            _ => None,
        }
    }
    fn inst_stmt(&mut self, c: &MacroCall) -> Option<Stmt> {
        match self.instantiate(c, SyntaxType::Stat)? {
            ModelBody::Stmt(s) => Some(s),
            _ => None,
        }
    }
    fn inst_defs(&mut self, c: &MacroCall) -> Option<Vec<Def>> {
        match self.instantiate(c, SyntaxType::IsaDefs)? {
            ModelBody::Defs(d) => Some(d),
            _ => None,
        }
    }
    fn inst_encs(&mut self, c: &MacroCall) -> Option<Vec<EncItem>> {
        match self.instantiate(c, SyntaxType::Encs)? {
            ModelBody::Encs(e) => Some(e),
            _ => None,
        }
    }
    fn model_def(&mut self, m: &ModelDef, _span: Span) -> bool {
        self.register(m);
        true
    }
}

/// Replaces every instantiation by its expansion and drops model definitions.
pub fn expand_macros(ast: &SpecAst) -> Result<SpecAst, SpecError> {
    let mut ex = Expander {
        models: HashMap::new(),
        errors: Vec::new(),
        depth: 0,
    };
    let mut defs = ast.defs.clone();
    walk_defs(&mut ex, &mut defs);
    if ex.errors.is_empty() {
        Ok(SpecAst { defs })
    } else {
        Err(SpecError { diags: ex.errors })
    }
}
