//! Renders syntax trees back to source text.

use std::fmt::Write;

use super::ast::*;
use super::lexer::{Tok, Token};

pub fn print_spec(ast: &SpecAst) -> String {
    let mut p = Printer::default();
    for d in &ast.defs {
        p.def(d);
        p.out.push('\n');
    }
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut p = Printer::default();
    p.expr(e, 0);
    p.out
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut p = Printer::default();
    p.stmt(s);
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

fn name(n: &Name) -> String {
    if n.hole {
        format!("${}", n.text)
    } else {
        n.text.clone()
    }
}

fn tokens(ts: &[Token]) -> String {
    let mut s = String::new();
    for t in ts {
        if !s.is_empty() {
            s.push(' ');
        }
        match &t.tok {
            Tok::Ident(x) => s.push_str(x),
            Tok::Dollar(x) => {
                s.push('$');
                s.push_str(x)
            }
            Tok::Int {
                value,
                radix,
                width,
            } => s.push_str(&int(*value, *radix, *width)),
            Tok::Str(x) => {
                let _ = write!(s, "{x:?}");
            }
            Tok::Punct(p) => s.push_str(p),
            Tok::Eof => {}
        }
    }
    s
}

fn int(value: u128, radix: Radix, width: Option<u32>) -> String {
    match (radix, width) {
        (Radix::Hex, Some(w)) => format!("0x{:0w$x}", value, w = (w / 4) as usize),
        (Radix::Bin, Some(w)) => format!("0b{:0w$b}", value, w = w as usize),
        _ => format!("{value}"),
    }
}

impl Printer {
    fn nl(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn ty(&mut self, t: &TypeExpr) {
        self.out.push_str(&name(&t.name));
        if let Some(a) = &t.arg {
            self.out.push('<');
            self.expr(a, 0);
            self.out.push('>');
        }
    }

    fn call(&mut self, c: &MacroCall) {
        let args: Vec<String> = c.args.iter().map(|a| tokens(a)).collect();
        let _ = write!(self.out, "${}({})", c.model.text, args.join(" ; "));
    }

    fn expr(&mut self, e: &Expr, prec: u8) {
        match &e.kind {
            ExprKind::Int {
                value,
                radix,
                width,
            } => self.out.push_str(&int(*value, *radix, *width)),
            ExprKind::Str(s) => {
                let _ = write!(self.out, "{s:?}");
            }
            ExprKind::Name(n) => self.out.push_str(&name(n)),
            ExprKind::Path(a, b) => {
                let _ = write!(self.out, "{}::{}", name(a), name(b));
            }
            ExprKind::Call { callee, size, args } => {
                self.out.push_str(&name(callee));
                if let Some(s) = size {
                    self.out.push('<');
                    self.expr(s, 0);
                    self.out.push('>');
                }
                self.out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    match a {
                        Arg::Expr(x) => self.expr(x, 0),
                        Arg::Range(x, y) => {
                            self.expr(x, 0);
                            self.out.push_str("..");
                            self.expr(y, 0);
                        }
                    }
                }
                self.out.push(')');
            }
            ExprKind::Unary(op, x) => {
                self.out.push(match op {
                    UnOp::Neg => '-',
                    UnOp::Not => '~',
                });
                self.expr(x, 100);
            }
            ExprKind::Binary(op, a, b) => {
                let (sym, p) = match op {
                    OpSym::Op(o) => (o.symbol().to_string(), o.precedence()),
                    OpSym::Hole(n) => (name(n), BinOp::Eq.precedence()),
                };
                if p < prec {
                    self.out.push('(');
                }
                self.expr(a, p);
                let _ = write!(self.out, " {sym} ");
                self.expr(b, p + 1);
                if p < prec {
                    self.out.push(')');
                }
            }
            ExprKind::Cast(x, t) => {
                if prec > 50 {
                    self.out.push('(');
                }
                self.expr(x, 50);
                self.out.push_str(" as ");
                self.ty(t);
                if prec > 50 {
                    self.out.push(')');
                }
            }
            ExprKind::Tuple(xs) => {
                self.out.push('(');
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(x, 0);
                }
                self.out.push(')');
            }
            ExprKind::If(c, a, b) => {
                self.out.push_str("(if ");
                self.expr(c, 0);
                self.out.push_str(" then ");
                self.expr(a, 0);
                self.out.push_str(" else ");
                self.expr(b, 0);
                self.out.push(')');
            }
            ExprKind::Match {
                scrutinee,
                arms,
                default,
            } => {
                self.out.push_str("(match ");
                self.expr(scrutinee, 0);
                self.out.push_str(" with { ");
                for (pats, body) in arms {
                    for (i, p) in pats.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(" | ");
                        }
                        self.expr(p, 0);
                    }
                    self.out.push_str(" => ");
                    self.expr(body, 0);
                    self.out.push_str(", ");
                }
                self.out.push_str("_ => ");
                self.expr(default, 0);
                self.out.push_str(" })");
            }
            ExprKind::Let(n, v, b) => {
                let _ = write!(self.out, "(let {} = ", name(n));
                self.expr(v, 0);
                self.out.push_str(" in ");
                self.expr(b, 0);
                self.out.push(')');
            }
            ExprKind::Member(x, m) => {
                self.expr(x, 100);
                let _ = write!(self.out, ".{}", name(m));
            }
            ExprKind::Method { recv, method, args } => {
                self.expr(recv, 100);
                let _ = write!(self.out, ".{}( ", name(method));
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, 0);
                }
                self.out.push_str(" )");
            }
            ExprKind::Resource(n) => {
                let _ = write!(self.out, "@{}", name(n));
            }
            ExprKind::Instantiate(c) => self.call(c),
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                self.expr(target, 0);
                self.out.push_str(" := ");
                self.expr(value, 0);
            }
            StmtKind::Let(n, v, b) => {
                let _ = write!(self.out, "let {} = ", name(n));
                self.expr(v, 0);
                self.out.push_str(" in");
                self.indent += 1;
                self.nl();
                self.stmt(b);
                self.indent -= 1;
            }
            StmtKind::If(c, a, b) => {
                self.out.push_str("if ");
                self.expr(c, 0);
                self.out.push_str(" then");
                self.indent += 1;
                self.nl();
                self.stmt(a);
                self.indent -= 1;
                if let Some(b) = b {
                    self.nl();
                    self.out.push_str("else");
                    self.indent += 1;
                    self.nl();
                    self.stmt(b);
                    self.indent -= 1;
                }
            }
            StmtKind::Match {
                scrutinee,
                arms,
                default,
            } => {
                self.out.push_str("match ");
                self.expr(scrutinee, 0);
                self.out.push_str(" with {");
                self.indent += 1;
                for (pats, body) in arms {
                    self.nl();
                    for (i, p) in pats.iter().enumerate() {
                        if i > 0 {
                            self.out.push_str(" | ");
                        }
                        self.expr(p, 0);
                    }
                    self.out.push_str(" => ");
                    self.stmt(body);
                    self.out.push(',');
                }
                if let Some(d) = default {
                    self.nl();
                    self.out.push_str("_ => ");
                    self.stmt(d);
                }
                self.indent -= 1;
                self.nl();
                self.out.push('}');
            }
            StmtKind::Block(ss) => {
                self.out.push('{');
                self.indent += 1;
                for x in ss {
                    self.nl();
                    self.stmt(x);
                }
                self.indent -= 1;
                self.nl();
                self.out.push('}');
            }
            StmtKind::Raise(n) => {
                let _ = write!(self.out, "raise {}", name(n));
            }
            StmtKind::Forall(_) => self.out.push_str("forall"),
            StmtKind::Expr(e) => self.expr(e, 0),
            StmtKind::Hole(n) => self.out.push_str(&name(n)),
            StmtKind::Instantiate(c) => self.call(c),
        }
    }

    fn encs(&mut self, items: &[EncItem]) {
        self.out.push_str("{ ");
        for (i, it) in items.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            match it {
                EncItem::Field { name: n, value } => {
                    let _ = write!(self.out, "{} = ", name(n));
                    self.expr(value, 0);
                }
                EncItem::Hole(n) => self.out.push_str(&name(n)),
                EncItem::Instantiate(c) => self.call(c),
            }
        }
        self.out.push_str(" }");
    }

    fn def(&mut self, d: &Def) {
        for a in &d.annotations {
            self.out.push_str("[ ");
            for (i, x) in a.items.iter().enumerate() {
                if i > 0 {
                    self.out.push(' ');
                }
                self.expr(x, 0);
            }
            self.out.push_str(" ]");
            self.nl();
        }
        match &d.kind {
            DefKind::Constant { name: n, ty, value } => {
                let _ = write!(self.out, "constant {}", name(n));
                if let Some(t) = ty {
                    self.out.push_str(" : ");
                    self.ty(t);
                }
                self.out.push_str(" = ");
                self.expr(value, 0);
            }
            DefKind::Using { name: n, ty } => {
                let _ = write!(self.out, "using {} = ", name(n));
                self.ty(ty);
            }
            DefKind::Function {
                name: n,
                params,
                ret,
                body,
            } => {
                let _ = write!(self.out, "function {}(", name(n));
                for (i, (p, t)) in params.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    let _ = write!(self.out, "{} : ", name(p));
                    self.ty(t);
                }
                self.out.push_str(") -> ");
                self.ty(ret);
                self.out.push_str(" = ");
                self.expr(body, 0);
            }
            DefKind::Enumeration {
                name: n,
                ty,
                members,
            } => {
                let _ = write!(self.out, "enumeration {}", name(n));
                if let Some(t) = ty {
                    self.out.push_str(" : ");
                    self.ty(t);
                }
                self.out.push_str(" = { ");
                for (i, (m, v)) in members.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.out.push_str(&name(m));
                    if let Some(v) = v {
                        self.out.push_str(" = ");
                        self.expr(v, 0);
                    }
                }
                self.out.push_str(" }");
            }
            DefKind::Format { name: n, ty, items } => {
                let _ = write!(self.out, "format {} : ", name(n));
                self.ty(ty);
                self.out.push_str(" =");
                self.indent += 1;
                for (i, it) in items.iter().enumerate() {
                    self.nl();
                    self.out.push_str(if i == 0 { "{ " } else { ", " });
                    match it {
                        FormatItem::Field { name: f, shape } => {
                            self.out.push_str(&name(f));
                            match shape {
                                FieldShape::Ranges(rs) => {
                                    let parts: Vec<String> = rs
                                        .iter()
                                        .map(|(h, l)| {
                                            if h == l {
                                                format!("{h}")
                                            } else {
                                                format!("{h}..{l}")
                                            }
                                        })
                                        .collect();
                                    let _ = write!(self.out, " [{}]", parts.join(", "));
                                }
                                FieldShape::Typed(t) => {
                                    self.out.push_str(" : ");
                                    self.ty(t);
                                }
                            }
                        }
                        FormatItem::Access { name: f, body } => {
                            let _ = write!(self.out, "{} = ", name(f));
                            self.expr(body, 0);
                        }
                        FormatItem::Predicate { name: f, body } => {
                            let _ = write!(self.out, "predicate {} = ", name(f));
                            self.expr(body, 0);
                        }
                        FormatItem::Encoding { name: f, items } => {
                            let _ = write!(self.out, "encoding {} = ", name(f));
                            self.encs(items);
                        }
                    }
                }
                if items.is_empty() {
                    self.out.push_str(" {");
                }
                self.nl();
                self.out.push('}');
                self.indent -= 1;
            }
            DefKind::Register { name: n, ty } => {
                let _ = write!(self.out, "register {} : ", name(n));
                self.ty(ty);
            }
            DefKind::RegisterFile {
                name: n,
                index,
                elem,
            } => {
                let _ = write!(self.out, "register file {} : ", name(n));
                self.ty(index);
                self.out.push_str(" -> ");
                self.ty(elem);
            }
            DefKind::ProgramCounter { name: n, ty } => {
                let _ = write!(self.out, "program counter {} : ", name(n));
                self.ty(ty);
            }
            DefKind::Memory {
                name: n,
                addr,
                unit,
            } => {
                let _ = write!(self.out, "memory {} : ", name(n));
                self.ty(addr);
                self.out.push_str(" -> ");
                self.ty(unit);
            }
            DefKind::Instruction {
                name: n,
                format,
                body,
            } => {
                let _ = write!(self.out, "instruction {} : {} =", name(n), name(format));
                self.indent += 1;
                self.nl();
                self.stmt(body);
                self.indent -= 1;
            }
            DefKind::Encoding { name: n, items } => {
                let _ = write!(self.out, "encoding {} = ", name(n));
                self.encs(items);
            }
            DefKind::Assembly { names, body } => {
                let ns: Vec<String> = names.iter().map(name).collect();
                let _ = write!(self.out, "assembly {} = ", ns.join(", "));
                self.expr(body, 0);
            }
            DefKind::Model(m) => {
                let ps: Vec<String> = m
                    .params
                    .iter()
                    .map(|(n, t)| format!("{} : {t}", n.text))
                    .collect();
                let _ = write!(
                    self.out,
                    "model {} ({}) : {} = {{",
                    m.name.text,
                    ps.join(", "),
                    m.result
                );
                self.indent += 1;
                self.nl();
                match &m.body {
                    ModelBody::Defs(ds) => {
                        for (i, d) in ds.iter().enumerate() {
                            if i > 0 {
                                self.nl();
                            }
                            self.def(d);
                        }
                    }
                    ModelBody::Expr(e) => self.expr(e, 0),
                    ModelBody::Stmt(s) => self.stmt(s),
                    ModelBody::Encs(e) => {
                        self.encs(e);
                    }
                    ModelBody::Name(n) => self.out.push_str(&name(n)),
                    ModelBody::Op(OpSym::Op(o)) => self.out.push_str(o.symbol()),
                    ModelBody::Op(OpSym::Hole(n)) => self.out.push_str(&name(n)),
                }
                self.indent -= 1;
                self.nl();
                self.out.push('}');
            }
            DefKind::Instantiate(c) => self.call(c),
            DefKind::Hole(n) => self.out.push_str(&name(n)),
            DefKind::Isa { name: n, defs } => {
                let _ = write!(self.out, "instruction set architecture {} = {{", name(n));
                self.indent += 1;
                for d in defs {
                    self.nl();
                    self.def(d);
                }
                self.indent -= 1;
                self.nl();
                self.out.push('}');
            }
            DefKind::Mia {
                name: n,
                isa,
                items,
            } => {
                let _ = write!(
                    self.out,
                    "micro architecture {} implements {} = {{",
                    name(n),
                    name(isa)
                );
                self.indent += 1;
                for it in items {
                    self.nl();
                    match it {
                        MiaItem::Logic {
                            name: l,
                            annotations,
                            ..
                        } => {
                            for a in annotations {
                                self.out.push_str("[ ");
                                for x in &a.items {
                                    self.expr(x, 0);
                                    self.out.push(' ');
                                }
                                self.out.push(']');
                                self.nl();
                            }
                            let _ = write!(self.out, "logic {}", name(l));
                        }
                        MiaItem::Stage(s) => {
                            let _ = write!(self.out, "stage {}", name(&s.name));
                            if !s.outputs.is_empty() {
                                self.out.push_str(" -> ( ");
                                for (i, (o, t)) in s.outputs.iter().enumerate() {
                                    if i > 0 {
                                        self.out.push_str(", ");
                                    }
                                    let _ = write!(self.out, "{} : ", name(o));
                                    self.ty(t);
                                }
                                self.out.push_str(" )");
                            }
                            self.out.push_str(" = ");
                            self.stmt(&s.body);
                        }
                    }
                }
                self.indent -= 1;
                self.nl();
                self.out.push('}');
            }
            DefKind::Processor {
                name: n,
                isa,
                items,
            } => {
                let _ = write!(
                    self.out,
                    "micro processor {} implements {} = {{",
                    name(n),
                    name(isa)
                );
                self.indent += 1;
                for (k, v) in items {
                    self.nl();
                    let _ = write!(self.out, "{} = ", name(k));
                    self.expr(v, 0);
                }
                self.indent -= 1;
                self.nl();
                self.out.push('}');
            }
            DefKind::Import(f) => {
                let _ = write!(self.out, "import {f:?}");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::macros::expand_macros;
    use crate::frontend::parser::parse_spec;

    /// Equality up to source positions.
    fn reprint(src: &str) -> String {
        print_spec(&parse_spec(src).unwrap())
    }

    #[test]
    fn expression_round_trip_keeps_structure() {
        let once = reprint("constant c = (a + b) * c as Bits<4> & ~d(3..0)");
        assert_eq!(reprint(&once), once);
        assert!(once.contains("(a + b) * c as Bits<4> & ~d(3..0)"));
    }

    #[test]
    fn expanded_bundled_spec_reparses_to_the_same_text() {
        let ast = parse_spec(include_str!("../../specs/rv32i.pdl")).unwrap();
        let text = print_spec(&expand_macros(&ast).unwrap());
        let again = print_spec(&parse_spec(&text).unwrap());
        assert_eq!(text, again);
        assert!(text.contains("instruction ADD : Rtype"));
    }
}
