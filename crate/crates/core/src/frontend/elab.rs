//! Name resolution, type checking and constant folding.

use std::collections::{BTreeMap, HashMap};

use super::ast::{self, *};
use super::error::{Diag, DiagKind, SpecError};
use super::eval::{eval_const, fold};
use super::model::*;
use super::print::print_expr;
use super::rw::check_read_write;
use crate::value::{Value, MAX_WIDTH};

type R<T> = Result<T, Diag>;

fn terr(span: Span, msg: impl Into<String>) -> Diag {
    Diag::new(DiagKind::Type, span, msg)
}

fn nerr(span: Span, msg: impl Into<String>) -> Diag {
    Diag::new(DiagKind::Name, span, msg)
}

fn int_const(v: i128) -> TExpr {
    TExpr::constant(Value::new(v as u128, MAX_WIDTH), Ty::Int)
}

fn int_value(e: &TExpr) -> Option<i128> {
    match (&e.kind, e.ty) {
        (TExprKind::Const(v), Ty::Int) => Some(v.bits() as i128),
        _ => None,
    }
}

fn retype(mut e: TExpr, ty: Ty) -> TExpr {
    e.ty = ty;
    e
}

#[derive(Clone, Debug)]
enum Local {
    Slot(u32, Ty),
    Const(TExpr),
}

/// What bare names resolve to while elaborating an expression.
#[derive(Default)]
struct Scope {
    format: Option<usize>,
    /// Fields of a format under construction (for access-function bodies).
    partial_fields: Option<Vec<Field>>,
    locals: Vec<(String, Local)>,
    next_slot: u32,
    /// Operand name inside predicates and encodings; bound to slot 0.
    operand: Option<(String, Ty)>,
    resources: bool,
    depth: usize,
}

impl Scope {
    fn lookup_local(&self, name: &str) -> Option<&Local> {
        self.locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l)
    }

    fn fresh(&mut self) -> u32 {
        let s = self.next_slot;
        self.next_slot += 1;
        s
    }
}

struct FnDef {
    params: Vec<(String, Ty)>,
    ret: Ty,
    body: ast::Expr,
}

struct Elab {
    m: SpecModel,
    errors: Vec<Diag>,
    names: HashMap<String, Span>,
    functions: HashMap<String, FnDef>,
    format_ids: HashMap<String, usize>,
    file_ids: HashMap<String, usize>,
    reg_ids: HashMap<String, usize>,
    mem_ids: HashMap<String, usize>,
}

/// Elaborates a macro-free syntax tree.
pub fn elaborate(ast: &SpecAst) -> Result<SpecModel, SpecError> {
    let mut e = Elab {
        m: SpecModel::default(),
        errors: Vec::new(),
        names: HashMap::new(),
        functions: HashMap::new(),
        format_ids: HashMap::new(),
        file_ids: HashMap::new(),
        reg_ids: HashMap::new(),
        mem_ids: HashMap::new(),
    };
    e.run(ast);
    if e.errors.is_empty() {
        Ok(e.m)
    } else {
        e.errors.sort_by_key(|d| d.span);
        e.errors.dedup();
        Err(SpecError { diags: e.errors })
    }
}

impl Elab {
    fn report<T>(&mut self, r: R<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(d) => {
                self.errors.push(d);
                None
            }
        }
    }

    fn declare(&mut self, n: &Name) {
        if n.hole {
            self.errors.push(Diag::new(
                DiagKind::MacroType,
                n.span,
                format!("unexpanded parameter `${}`", n.text),
            ));
            return;
        }
        if let Some(prev) = self.names.insert(n.text.clone(), n.span) {
            self.errors.push(nerr(
                n.span,
                format!("`{}` is already defined at {prev}", n.text),
            ));
        }
    }

    fn run(&mut self, ast: &SpecAst) {
        let mut isa: Option<(&Name, &Vec<Def>)> = None;
        let mut globals = Vec::new();
        let mut later = Vec::new();
        for d in &ast.defs {
            match &d.kind {
                DefKind::Isa { name, defs } => {
                    if let Some((first, _)) = isa {
                        self.errors.push(Diag::new(
                            DiagKind::UnsupportedFeature,
                            name.span,
                            format!(
                                "only one instruction set architecture per specification (`{}` is already defined)",
                                first.text
                            ),
                        ));
                    } else {
                        isa = Some((name, defs));
                    }
                }
                DefKind::Mia { .. } | DefKind::Processor { .. } => later.push(d),
                _ => globals.push(d),
            }
        }
        let mut all: Vec<&Def> = globals;
        if let Some((name, defs)) = isa {
            self.m.isa_name = name.text.clone();
            all.extend(defs.iter());
        }
        let mut second = Vec::new();
        for d in all {
            match &d.kind {
                DefKind::Instruction { .. } | DefKind::Encoding { .. } | DefKind::Assembly { .. } => {
                    second.push(d)
                }
                _ => self.first_pass(d),
            }
        }
        self.check_formats_fixed_width();
        self.instructions(&second);
        for d in later {
            match &d.kind {
                DefKind::Mia { name, isa, items } => {
                    self.check_isa_ref(isa);
                    if let Some(m) = self.mia(name, items, &d.annotations, d.span) {
                        if self.m.mias.iter().any(|x| x.name == m.name) {
                            self.errors.push(nerr(
                                name.span,
                                format!("micro architecture `{}` is defined twice", name.text),
                            ));
                        } else {
                            self.m.mias.push(m);
                        }
                    }
                }
                DefKind::Processor { name, isa, items } => {
                    self.check_isa_ref(isa);
                    self.processor(name, items);
                }
                _ => unreachable!(),
            }
        }
    }

    fn check_isa_ref(&mut self, isa: &Name) {
        if isa.text != self.m.isa_name {
            self.errors.push(nerr(
                isa.span,
                format!("unknown instruction set architecture `{}`", isa.text),
            ));
        }
    }

    // ----------------------------------------------------------- first pass

    fn first_pass(&mut self, d: &Def) {
        match &d.kind {
            DefKind::Constant { name, ty, value } => {
                self.declare(name);
                let mut sc = Scope::default();
                let r = (|| -> R<(Value, Ty)> {
                    let mut v = self.expr(value, &mut sc)?;
                    if let Some(t) = ty {
                        let t = self.ty(t)?;
                        v = self.coerce(v, t, value.span)?;
                    }
                    let folded = eval_const(&v)
                        .ok_or_else(|| terr(value.span, "constant value is not constant"))?;
                    Ok((folded, v.ty))
                })();
                if let Some(v) = self.report(r) {
                    self.m.constants.insert(name.text.clone(), v);
                }
            }
            DefKind::Using { name, ty } => {
                self.declare(name);
                let r = self.ty(ty);
                if let Some(t) = self.report(r) {
                    self.m.aliases.insert(name.text.clone(), t);
                }
            }
            DefKind::Function {
                name,
                params,
                ret,
                body,
            } => {
                self.declare(name);
                let r = (|| -> R<FnDef> {
                    let mut ps = Vec::new();
                    for (p, t) in params {
                        ps.push((p.text.clone(), self.ty(t)?));
                    }
                    Ok(FnDef {
                        params: ps,
                        ret: self.ty(ret)?,
                        body: body.clone(),
                    })
                })();
                if let Some(f) = self.report(r) {
                    // check the body once with opaque parameters
                    let mut sc = Scope::default();
                    for (p, t) in &f.params {
                        let s = sc.fresh();
                        sc.locals.push((p.clone(), Local::Slot(s, *t)));
                    }
                    let checked = self
                        .expr(&f.body, &mut sc)
                        .and_then(|b| self.coerce(b, f.ret, f.body.span));
                    self.report(checked);
                    self.functions.insert(name.text.clone(), f);
                }
            }
            DefKind::Enumeration { name, ty, members } => {
                self.declare(name);
                let r = (|| -> R<BTreeMap<String, Value>> {
                    let t = match ty {
                        Some(t) => self.ty(t)?,
                        None => Ty::bits(crate::value::MAX_WIDTH.min(
                            (members.len().max(2) as u128).next_power_of_two().trailing_zeros(),
                        )),
                    };
                    let mut out = BTreeMap::new();
                    let mut next: u128 = 0;
                    for (m, v) in members {
                        let val = match v {
                            Some(v) => {
                                let mut sc = Scope::default();
                                let e = self.expr(v, &mut sc)?;
                                let e = self.coerce(e, t, v.span)?;
                                eval_const(&e)
                                    .ok_or_else(|| terr(v.span, "enumeration value is not constant"))?
                                    .bits()
                            }
                            None => next,
                        };
                        next = val + 1;
                        if out
                            .insert(m.text.clone(), Value::new(val, t.width().unwrap_or(1)))
                            .is_some()
                        {
                            return Err(nerr(m.span, format!("duplicate member `{}`", m.text)));
                        }
                    }
                    Ok(out)
                })();
                if let Some(map) = self.report(r) {
                    self.m.enums.insert(name.text.clone(), map);
                }
            }
            DefKind::Format { name, ty, items } => {
                self.declare(name);
                let r = self.format(name, ty, items);
                if let Some(f) = self.report(r) {
                    self.format_ids.insert(f.name.clone(), self.m.formats.len());
                    self.m.formats.push(f);
                }
            }
            DefKind::Register { name, ty } => {
                self.declare(name);
                let r = self.sized(ty);
                if let Some(w) = self.report(r) {
                    self.reg_ids.insert(name.text.clone(), self.m.registers.len());
                    self.m.registers.push(Register {
                        name: name.text.clone(),
                        width: w,
                    });
                }
            }
            DefKind::RegisterFile { name, index, elem } => {
                self.declare(name);
                let r = (|| -> R<RegFile> {
                    let iw = self.sized(index)?;
                    if iw > 16 {
                        return Err(terr(index.span, "register file index wider than 16 bits"));
                    }
                    Ok(RegFile {
                        name: name.text.clone(),
                        index_width: iw,
                        elem_width: self.sized(elem)?,
                        hardwired: BTreeMap::new(),
                    })
                })();
                if let Some(mut f) = self.report(r) {
                    for a in &d.annotations {
                        let r = self.zero_annotation(&mut f, a);
                        self.report(r);
                    }
                    self.file_ids.insert(name.text.clone(), self.m.files.len());
                    self.m.files.push(f);
                }
            }
            DefKind::ProgramCounter { name, ty } => {
                self.declare(name);
                if self.m.pc.is_some() {
                    self.errors
                        .push(nerr(name.span, "more than one program counter"));
                }
                let mut semantics = PcSemantics::Current;
                for a in &d.annotations {
                    let words: Vec<String> = a
                        .items
                        .iter()
                        .map(|x| match &x.kind {
                            ExprKind::Name(n) => n.text.clone(),
                            _ => String::new(),
                        })
                        .collect();
                    match words.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
                        ["current"] => semantics = PcSemantics::Current,
                        ["next"] => semantics = PcSemantics::Next,
                        ["next", "next"] => semantics = PcSemantics::NextNext,
                        _ => self.errors.push(Diag::new(
                            DiagKind::UnsupportedFeature,
                            a.span,
                            "unsupported program counter annotation",
                        )),
                    }
                }
                let r = self.sized(ty);
                if let Some(w) = self.report(r) {
                    self.m.pc = Some(Pc {
                        name: name.text.clone(),
                        width: w,
                        semantics,
                    });
                }
            }
            DefKind::Memory { name, addr, unit } => {
                self.declare(name);
                let mut endian = Endian::Little;
                for a in &d.annotations {
                    match a.items.as_slice() {
                        [Expr {
                            kind: ExprKind::Name(n),
                            ..
                        }] if n.text == "littleEndian" => endian = Endian::Little,
                        [Expr {
                            kind: ExprKind::Name(n),
                            ..
                        }] if n.text == "bigEndian" => endian = Endian::Big,
                        _ => self.errors.push(Diag::new(
                            DiagKind::UnsupportedFeature,
                            a.span,
                            "unsupported memory annotation",
                        )),
                    }
                }
                let r = (|| -> R<Memory> {
                    let aw = self.sized(addr)?;
                    if aw > 64 {
                        return Err(terr(addr.span, "memory address wider than 64 bits"));
                    }
                    Ok(Memory {
                        name: name.text.clone(),
                        addr_width: aw,
                        unit_width: self.sized(unit)?,
                        endian,
                    })
                })();
                if let Some(m) = self.report(r) {
                    self.mem_ids.insert(name.text.clone(), self.m.memories.len());
                    self.m.memories.push(m);
                }
            }
            DefKind::Model(_) | DefKind::Instantiate(_) | DefKind::Hole(_) => {
                self.errors.push(Diag::new(
                    DiagKind::MacroType,
                    d.span,
                    "model definitions and instantiations must be expanded before elaboration",
                ));
            }
            DefKind::Import(_) => self.errors.push(Diag::new(
                DiagKind::Import,
                d.span,
                "unresolved import; load the file through the loader",
            )),
            DefKind::Isa { .. } | DefKind::Mia { .. } | DefKind::Processor { .. } => {
                self.errors.push(Diag::new(
                    DiagKind::Syntax,
                    d.span,
                    format!("`{}` is not allowed here", d.kind.keyword()),
                ))
            }
            DefKind::Instruction { .. } | DefKind::Encoding { .. } | DefKind::Assembly { .. } => {
                unreachable!()
            }
        }
    }

    fn zero_annotation(&mut self, f: &mut RegFile, a: &Annotation) -> R<()> {
        let bad = || {
            Diag::new(
                DiagKind::UnsupportedFeature,
                a.span,
                "unsupported register file annotation; expected `[F(i) = c]`",
            )
        };
        let [Expr {
            kind: ExprKind::Binary(OpSym::Op(BinOp::Eq), lhs, rhs),
            ..
        }] = a.items.as_slice()
        else {
            return Err(bad());
        };
        let ExprKind::Call { callee, args, size: None } = &lhs.kind else {
            return Err(bad());
        };
        if callee.text != f.name || args.len() != 1 {
            return Err(bad());
        }
        let Arg::Expr(idx) = &args[0] else {
            return Err(bad());
        };
        let mut sc = Scope::default();
        let i = self.expr(idx, &mut sc)?;
        let i = self.coerce(i, Ty::bits(f.index_width), idx.span)?;
        let v = self.expr(rhs, &mut sc)?;
        let v = self.coerce(v, Ty::bits(f.elem_width), rhs.span)?;
        let (Some(i), Some(v)) = (eval_const(&i), eval_const(&v)) else {
            return Err(terr(a.span, "register constraint must be constant"));
        };
        f.hardwired.insert(i.bits(), v);
        Ok(())
    }

    fn check_formats_fixed_width(&mut self) {
        let mut widths: Vec<(u32, &str)> = self
            .m
            .formats
            .iter()
            .map(|f| (f.width, f.name.as_str()))
            .collect();
        widths.sort();
        widths.dedup_by_key(|(w, _)| *w);
        if widths.len() > 1 {
            self.errors.push(Diag::new(
                DiagKind::UnsupportedFeature,
                Span::default(),
                format!(
                    "variable-length instruction formats are not supported ({} is {} bits, {} is {} bits)",
                    widths[0].1, widths[0].0, widths[1].1, widths[1].0
                ),
            ));
        }
    }

    // -------------------------------------------------------------- types

    fn ty(&mut self, t: &TypeExpr) -> R<Ty> {
        if t.name.hole {
            return Err(Diag::new(
                DiagKind::MacroType,
                t.span,
                format!("unexpanded parameter `${}`", t.name.text),
            ));
        }
        let width = |s: &mut Self| -> R<u32> {
            let a = t
                .arg
                .as_ref()
                .ok_or_else(|| terr(t.span, format!("`{}` needs a width", t.name.text)))?;
            let mut sc = Scope::default();
            let e = s.expr(a, &mut sc)?;
            let v = int_value(&e)
                .or_else(|| eval_const(&e).map(|v| v.bits() as i128))
                .ok_or_else(|| terr(a.span, "width must be constant"))?;
            if v < 1 || v > MAX_WIDTH as i128 {
                return Err(terr(a.span, format!("width {v} outside 1..=128")));
            }
            Ok(v as u32)
        };
        match t.name.text.as_str() {
            "Bits" => Ok(Ty::Bits(Kind::Bits, width(self)?)),
            "SInt" => Ok(Ty::Bits(Kind::SInt, width(self)?)),
            "UInt" => Ok(Ty::Bits(Kind::UInt, width(self)?)),
            "Bool" => Ok(Ty::Bool),
            "String" => Ok(Ty::Str),
            other => {
                if t.arg.is_some() {
                    return Err(terr(t.span, format!("`{other}` takes no width")));
                }
                self.m
                    .aliases
                    .get(other)
                    .copied()
                    .ok_or_else(|| nerr(t.name.span, format!("unknown type `{other}`")))
            }
        }
    }

    fn sized(&mut self, t: &TypeExpr) -> R<u32> {
        let ty = self.ty(t)?;
        ty.width()
            .ok_or_else(|| terr(t.span, format!("expected a sized type, found {ty}")))
    }

    // ------------------------------------------------------------ formats

    fn format(&mut self, name: &Name, ty: &TypeExpr, items: &[FormatItem]) -> R<Format> {
        let width = self.sized(ty)?;
        let mut fields: Vec<Field> = Vec::new();
        let mut typed: Vec<(Name, u32)> = Vec::new();
        let mut ranged = false;
        for it in items {
            if let FormatItem::Field { name: f, shape } = it {
                if fields.iter().any(|x| x.name == f.text) || typed.iter().any(|(n, _)| n.text == f.text) {
                    return Err(nerr(f.span, format!("duplicate field `{}`", f.text)));
                }
                match shape {
                    FieldShape::Ranges(rs) => {
                        ranged = true;
                        let w = rs.iter().map(|(h, l)| h - l + 1).sum();
                        for &(h, _) in rs {
                            if h >= width {
                                return Err(Diag::new(
                                    DiagKind::FormatOverlap,
                                    f.span,
                                    format!("field `{}` bit {h} lies outside the {width}-bit format", f.text),
                                ));
                            }
                        }
                        fields.push(Field {
                            name: f.text.clone(),
                            ranges: rs.clone(),
                            width: w,
                        });
                    }
                    FieldShape::Typed(t) => typed.push((f.clone(), self.sized(t)?)),
                }
            }
        }
        if ranged && !typed.is_empty() {
            return Err(terr(
                name.span,
                "format mixes bit-range fields and typed fields",
            ));
        }
        if !typed.is_empty() {
            let total: u32 = typed.iter().map(|(_, w)| w).sum();
            if total != width {
                return Err(terr(
                    name.span,
                    format!("typed fields of `{}` cover {total} bits, the format has {width}", name.text),
                ));
            }
            let mut hi = width;
            for (f, w) in typed {
                fields.push(Field {
                    name: f.text.clone(),
                    ranges: vec![(hi - 1, hi - w)],
                    width: w,
                });
                hi -= w;
            }
        }
        // pairwise disjoint
        let mut owner: Vec<Option<usize>> = vec![None; width as usize];
        for (i, f) in fields.iter().enumerate() {
            for &(h, l) in &f.ranges {
                for b in l..=h {
                    if let Some(j) = owner[b as usize] {
                        return Err(Diag::new(
                            DiagKind::FormatOverlap,
                            name.span,
                            format!(
                                "fields `{}` and `{}` of format `{}` overlap at bit {b}",
                                fields[j].name, f.name, name.text
                            ),
                        ));
                    }
                    owner[b as usize] = Some(i);
                }
            }
        }

        let mut access: Vec<AccessFn> = Vec::new();
        let mut sources: Vec<&ast::Expr> = Vec::new();
        for it in items {
            if let FormatItem::Access { name: a, body } = it {
                if fields.iter().any(|f| f.name == a.text) || access.iter().any(|x| x.name == a.text) {
                    return Err(nerr(a.span, format!("duplicate format item `{}`", a.text)));
                }
                let mut sc = Scope {
                    partial_fields: Some(fields.clone()),
                    ..Scope::default()
                };
                let b = self.expr(body, &mut sc)?;
                if b.ty.width().is_none() {
                    return Err(terr(body.span, "access function needs a sized type"));
                }
                access.push(AccessFn {
                    name: a.text.clone(),
                    ty: b.ty,
                    body: fold(&b),
                    inverse: Inverse::Trivial {
                        field: 0,
                        signed: false,
                    },
                });
                sources.push(body);
            }
        }
        let mut preds: HashMap<String, Vec<PredicateClause>> = HashMap::new();
        let mut encs: HashMap<String, Vec<(usize, TExpr)>> = HashMap::new();
        for it in items {
            match it {
                FormatItem::Predicate { name: a, body } => {
                    let Some(af) = access.iter().find(|x| x.name == a.text) else {
                        return Err(nerr(a.span, format!("predicate for unknown access function `{}`", a.text)));
                    };
                    let ty = af.ty;
                    let mut clauses = Vec::new();
                    for c in conjuncts(body) {
                        let mut sc = Scope {
                            operand: Some((a.text.clone(), ty)),
                            next_slot: 1,
                            ..Scope::default()
                        };
                        let e = self.expr(c, &mut sc)?;
                        let e = self.coerce(e, Ty::Bool, c.span)?;
                        clauses.push(PredicateClause {
                            expr: e,
                            description: describe_clause(c, &a.text),
                        });
                    }
                    if preds.insert(a.text.clone(), clauses).is_some() {
                        return Err(nerr(a.span, format!("second predicate for `{}`", a.text)));
                    }
                }
                FormatItem::Encoding { name: a, items: eitems } => {
                    let Some(af) = access.iter().find(|x| x.name == a.text) else {
                        return Err(nerr(a.span, format!("encoding for unknown access function `{}`", a.text)));
                    };
                    let ty = af.ty;
                    let mut out = Vec::new();
                    for ei in eitems {
                        let EncItem::Field { name: f, value } = ei else {
                            return Err(Diag::new(DiagKind::MacroType, a.span, "unexpanded encoding item"));
                        };
                        let Some(fi) = fields.iter().position(|x| x.name == f.text) else {
                            return Err(nerr(f.span, format!("`{}` is not a field of `{}`", f.text, name.text)));
                        };
                        let mut sc = Scope {
                            operand: Some((a.text.clone(), ty)),
                            next_slot: 1,
                            ..Scope::default()
                        };
                        let e = self.expr(value, &mut sc)?;
                        let e = self.coerce(e, Ty::bits(fields[fi].width), value.span)?;
                        out.push((fi, e));
                    }
                    if encs.insert(a.text.clone(), out).is_some() {
                        return Err(nerr(a.span, format!("second encoding for `{}`", a.text)));
                    }
                }
                _ => {}
            }
        }
        for (af, src) in access.iter_mut().zip(sources) {
            let p = preds.remove(&af.name);
            let e = encs.remove(&af.name);
            af.inverse = match (p, e) {
                (Some(predicate), Some(encoding)) => Inverse::Explicit {
                    predicate,
                    encoding,
                },
                (None, None) => match trivial_inverse(&af.body) {
                    Some((field, signed)) => Inverse::Trivial { field, signed },
                    None => {
                        return Err(terr(
                            src.span,
                            format!(
                                "access function `{}` is not trivially invertible and needs both a predicate and an encoding",
                                af.name
                            ),
                        ))
                    }
                },
                (Some(_), None) | (None, Some(_)) => {
                    return Err(terr(
                        src.span,
                        format!("access function `{}` needs both a predicate and an encoding", af.name),
                    ))
                }
            };
        }
        Ok(Format {
            name: name.text.clone(),
            width,
            fields,
            access,
        })
    }

    // -------------------------------------------------------- expressions

    fn coerce(&self, e: TExpr, target: Ty, span: Span) -> R<TExpr> {
        if e.ty == target {
            return Ok(e);
        }
        if let Some(v) = int_value(&e) {
            return match target {
                Ty::Bool => match v {
                    0 | 1 => Ok(TExpr::constant(Value::bool(v == 1), Ty::Bool)),
                    _ => Err(terr(span, format!("constant {v} is not a Bool"))),
                },
                Ty::Bits(_, w) => {
                    let fits = if w >= 127 {
                        true
                    } else {
                        v >= -(1i128 << (w - 1)) && v < (1i128 << w)
                    };
                    if !fits {
                        return Err(terr(span, format!("constant {v} does not fit in {target}")));
                    }
                    Ok(TExpr::constant(Value::from_i128(v, w), target))
                }
                Ty::Int => Ok(e),
                Ty::Str => Err(terr(span, "expected a string")),
            };
        }
        match (e.ty, target) {
            (Ty::Bool, Ty::Bits(_, 1)) | (Ty::Bits(_, 1), Ty::Bool) => Ok(retype(e, target)),
            (Ty::Bits(_, a), Ty::Bits(_, b)) if a == b => Ok(retype(e, target)),
            (from, to) => Err(terr(span, format!("expected {to}, found {from}"))),
        }
    }

    fn cast(&self, e: TExpr, to: Ty, span: Span) -> R<TExpr> {
        if let Some(v) = int_value(&e) {
            return match to {
                Ty::Bits(_, w) => Ok(TExpr::constant(Value::from_i128(v, w), to)),
                Ty::Bool => Ok(TExpr::constant(Value::bool(v != 0), to)),
                _ => Err(terr(span, format!("cannot cast a constant to {to}"))),
            };
        }
        let (from_kind, from_w) = match e.ty {
            Ty::Bool => (Kind::UInt, 1),
            Ty::Bits(k, w) => (k, w),
            other => return Err(terr(span, format!("cannot cast {other}"))),
        };
        let (to_kind, to_w) = match to {
            Ty::Bool => {
                if from_w != 1 {
                    return Err(terr(span, format!("cannot cast {} to Bool", e.ty)));
                }
                return Ok(retype(e, Ty::Bool));
            }
            Ty::Bits(k, w) => (k, w),
            other => return Err(terr(span, format!("cannot cast to {other}"))),
        };
        let kind = if to_w < from_w {
            CastKind::Trunc
        } else if to_w > from_w {
            let signed = from_kind == Kind::SInt || (from_kind == Kind::Bits && to_kind == Kind::SInt);
            if signed {
                CastKind::SExt
            } else {
                CastKind::ZExt
            }
        } else {
            return Ok(retype(e, to));
        };
        Ok(TExpr {
            kind: TExprKind::Cast(kind, Box::new(e)),
            ty: to,
        })
    }

    fn unify(&self, a: TExpr, b: TExpr, span: Span) -> R<(TExpr, TExpr, Ty)> {
        match (a.ty, b.ty) {
            (Ty::Int, Ty::Int) => Ok((a, b, Ty::Int)),
            (Ty::Int, t) => {
                let a = self.coerce(a, t, span)?;
                Ok((a, b, t))
            }
            (t, Ty::Int) => {
                let b = self.coerce(b, t, span)?;
                Ok((a, b, t))
            }
            (Ty::Bool, Ty::Bool) => Ok((a, b, Ty::Bool)),
            (Ty::Bool, Ty::Bits(_, 1)) | (Ty::Bits(_, 1), Ty::Bool) => Ok((a, b, Ty::Bool)),
            (Ty::Bits(k1, w1), Ty::Bits(k2, w2)) => {
                if w1 != w2 {
                    return Err(terr(
                        span,
                        format!("operand widths differ: {} and {}", a.ty, b.ty),
                    ));
                }
                let k = match (k1, k2) {
                    (x, y) if x == y => x,
                    (Kind::Bits, y) => y,
                    (x, Kind::Bits) => x,
                    _ => {
                        return Err(terr(
                            span,
                            format!("mixing {} and {} needs an explicit cast", a.ty, b.ty),
                        ))
                    }
                };
                Ok((a, b, Ty::Bits(k, w1)))
            }
            (x, y) => Err(terr(span, format!("incompatible operands {x} and {y}"))),
        }
    }

    fn fold_int(op: BinOp, a: i128, b: i128, span: Span) -> R<i128> {
        let ovf = || terr(span, "constant arithmetic overflows");
        let bool_ = |x: bool| x as i128;
        Ok(match op {
            BinOp::Add => a.checked_add(b).ok_or_else(ovf)?,
            BinOp::Sub => a.checked_sub(b).ok_or_else(ovf)?,
            BinOp::Mul | BinOp::MulWide => a.checked_mul(b).ok_or_else(ovf)?,
            BinOp::Div => {
                if b == 0 {
                    return Err(terr(span, "division by zero"));
                }
                a.div_euclid(b)
            }
            BinOp::Mod => {
                if b == 0 {
                    return Err(terr(span, "division by zero"));
                }
                a.rem_euclid(b)
            }
            BinOp::And => a & b,
            BinOp::Or => a | b,
            BinOp::Xor => a ^ b,
            BinOp::Shl => {
                if !(0..127).contains(&b) {
                    return Err(ovf());
                }
                a.checked_mul(1i128 << b).ok_or_else(ovf)?
            }
            BinOp::Shr => {
                if b < 0 {
                    return Err(ovf());
                }
                a >> b.min(127)
            }
            BinOp::Eq => bool_(a == b),
            BinOp::Ne => bool_(a != b),
            BinOp::Lt => bool_(a < b),
            BinOp::Le => bool_(a <= b),
            BinOp::Gt => bool_(a > b),
            BinOp::Ge => bool_(a >= b),
            BinOp::LogAnd => bool_(a != 0 && b != 0),
            BinOp::LogOr => bool_(a != 0 || b != 0),
        })
    }

    fn binary(&mut self, op: BinOp, a: TExpr, b: TExpr, span: Span) -> R<TExpr> {
        if let (Some(x), Some(y)) = (int_value(&a), int_value(&b)) {
            let v = Self::fold_int(op, x, y, span)?;
            if op.precedence() == BinOp::Eq.precedence() || op.precedence() == BinOp::Lt.precedence() {
                return Ok(TExpr::constant(Value::bool(v != 0), Ty::Bool));
            }
            return Ok(int_const(v));
        }
        let prim = |o: Op, args: Vec<TExpr>, ty: Ty| TExpr {
            kind: TExprKind::Prim(o, args),
            ty,
        };
        match op {
            BinOp::Shl | BinOp::Shr => {
                let a = if a.ty == Ty::Int {
                    return Err(terr(span, "cannot infer the width of the shifted constant"));
                } else {
                    a
                };
                let t = a.ty;
                if t.width().is_none() {
                    return Err(terr(span, format!("cannot shift {t}")));
                }
                let b = if b.ty == Ty::Int {
                    self.coerce(b, t, span)?
                } else if b.ty.width().is_some() {
                    b
                } else {
                    return Err(terr(span, format!("shift amount of type {}", b.ty)));
                };
                let o = match op {
                    BinOp::Shl => Op::Shl,
                    _ if t.is_signed() => Op::Ashr,
                    _ => Op::Lshr,
                };
                Ok(prim(o, vec![a, b], t))
            }
            _ => {
                let (a, b, t) = self.unify(a, b, span)?;
                if t == Ty::Int {
                    unreachable!("folded above");
                }
                if t == Ty::Str || t.width().is_none() {
                    return Err(terr(span, format!("operator `{}` on {t}", op.symbol())));
                }
                let signed = t.is_signed();
                Ok(match op {
                    BinOp::Add => prim(Op::Add, vec![a, b], t),
                    BinOp::Sub => prim(Op::Sub, vec![a, b], t),
                    BinOp::Mul => prim(Op::Mul, vec![a, b], t),
                    BinOp::MulWide => {
                        let w = t.width().unwrap() * 2;
                        if w > MAX_WIDTH {
                            return Err(terr(span, "double-width product exceeds 128 bits"));
                        }
                        let o = if signed { Op::MulWideS } else { Op::MulWideU };
                        prim(o, vec![a, b], Ty::Bits(t.kind(), w))
                    }
                    BinOp::And | BinOp::LogAnd => prim(Op::And, vec![a, b], t),
                    BinOp::Or | BinOp::LogOr => prim(Op::Or, vec![a, b], t),
                    BinOp::Xor => prim(Op::Xor, vec![a, b], t),
                    BinOp::Eq => prim(Op::Eq, vec![a, b], Ty::Bool),
                    BinOp::Ne => prim(Op::Ne, vec![a, b], Ty::Bool),
                    BinOp::Lt => prim(if signed { Op::Slt } else { Op::Ult }, vec![a, b], Ty::Bool),
                    BinOp::Le => prim(if signed { Op::Sle } else { Op::Ule }, vec![a, b], Ty::Bool),
                    BinOp::Gt => prim(if signed { Op::Slt } else { Op::Ult }, vec![b, a], Ty::Bool),
                    BinOp::Ge => prim(if signed { Op::Sle } else { Op::Ule }, vec![b, a], Ty::Bool),
                    BinOp::Div | BinOp::Mod => {
                        return Err(terr(
                            span,
                            format!("`{}` is only available on constants", op.symbol()),
                        ))
                    }
                    BinOp::Shl | BinOp::Shr => unreachable!(),
                })
            }
        }
    }

    fn const_u32(&mut self, e: &ast::Expr, sc: &mut Scope) -> R<u32> {
        let t = self.expr(e, sc)?;
        let v = int_value(&t)
            .or_else(|| eval_const(&t).map(|v| v.bits() as i128))
            .ok_or_else(|| terr(e.span, "expected a constant"))?;
        u32::try_from(v).map_err(|_| terr(e.span, format!("{v} is out of range")))
    }

    fn slice(&mut self, base: TExpr, args: &[Arg], span: Span, sc: &mut Scope) -> R<TExpr> {
        let w = base
            .ty
            .width()
            .ok_or_else(|| terr(span, format!("cannot slice {}", base.ty)))?;
        let (hi, lo) = match args {
            [Arg::Range(h, l)] => (self.const_u32(h, sc)?, self.const_u32(l, sc)?),
            [Arg::Expr(i)] => {
                let i = self.const_u32(i, sc)?;
                (i, i)
            }
            _ => return Err(terr(span, "expected a bit range `(hi..lo)`")),
        };
        if lo > hi || hi >= w {
            return Err(terr(span, format!("bit range {hi}..{lo} outside a {w}-bit value")));
        }
        Ok(TExpr {
            kind: TExprKind::Slice(Box::new(base), hi, lo),
            ty: Ty::bits(hi - lo + 1),
        })
    }

    fn name_value(&mut self, n: &Name, sc: &mut Scope) -> R<Option<TExpr>> {
        if n.hole {
            return Err(Diag::new(
                DiagKind::MacroType,
                n.span,
                format!("unexpanded parameter `${}`", n.text),
            ));
        }
        if let Some(l) = sc.lookup_local(&n.text) {
            return Ok(Some(match l.clone() {
                Local::Slot(s, ty) => TExpr {
                    kind: TExprKind::Var(s),
                    ty,
                },
                Local::Const(e) => e,
            }));
        }
        if let Some((op, ty)) = &sc.operand {
            if *op == n.text {
                return Ok(Some(TExpr {
                    kind: TExprKind::Var(0),
                    ty: *ty,
                }));
            }
        }
        if let Some(fields) = &sc.partial_fields {
            if let Some(i) = fields.iter().position(|f| f.name == n.text) {
                return Ok(Some(TExpr {
                    kind: TExprKind::Field(i),
                    ty: Ty::bits(fields[i].width),
                }));
            }
        }
        if let Some(fi) = sc.format {
            let f = &self.m.formats[fi];
            if let Some(i) = f.field_index(&n.text) {
                return Ok(Some(TExpr {
                    kind: TExprKind::Field(i),
                    ty: Ty::bits(f.fields[i].width),
                }));
            }
            if let Some(i) = f.access_index(&n.text) {
                return Ok(Some(TExpr {
                    kind: TExprKind::Access(i),
                    ty: f.access[i].ty,
                }));
            }
        }
        if let Some((v, ty)) = self.m.constants.get(&n.text) {
            return Ok(Some(TExpr::constant(*v, *ty)));
        }
        match n.text.as_str() {
            "true" => return Ok(Some(TExpr::constant(Value::bool(true), Ty::Bool))),
            "false" => return Ok(Some(TExpr::constant(Value::bool(false), Ty::Bool))),
            _ => {}
        }
        if let Some(pc) = &self.m.pc {
            if pc.name == n.text {
                if !sc.resources {
                    return Err(terr(n.span, "program counter read in a pure context"));
                }
                return Ok(Some(TExpr {
                    kind: TExprKind::ReadPc,
                    ty: Ty::bits(pc.width),
                }));
            }
        }
        if let Some(&r) = self.reg_ids.get(&n.text) {
            if !sc.resources {
                return Err(terr(n.span, "register read in a pure context"));
            }
            return Ok(Some(TExpr {
                kind: TExprKind::ReadReg(r),
                ty: Ty::bits(self.m.registers[r].width),
            }));
        }
        Ok(None)
    }

    fn expr(&mut self, e: &ast::Expr, sc: &mut Scope) -> R<TExpr> {
        let span = e.span;
        match &e.kind {
            ExprKind::Int { value, width, .. } => match width {
                Some(w) => Ok(TExpr::constant(Value::new(*value, *w), Ty::bits(*w))),
                None => {
                    let v = i128::try_from(*value)
                        .map_err(|_| terr(span, "decimal literal too large"))?;
                    Ok(int_const(v))
                }
            },
            ExprKind::Str(_) => Err(terr(span, "strings are only allowed in assembly definitions")),
            ExprKind::Name(n) => self
                .name_value(n, sc)?
                .ok_or_else(|| nerr(n.span, format!("unknown name `{}`", n.text))),
            ExprKind::Path(en, m) => {
                let map = self
                    .m
                    .enums
                    .get(&en.text)
                    .ok_or_else(|| nerr(en.span, format!("unknown enumeration `{}`", en.text)))?;
                let v = *map.get(&m.text).ok_or_else(|| {
                    nerr(m.span, format!("`{}` has no member `{}`", en.text, m.text))
                })?;
                Ok(TExpr::constant(v, Ty::bits(v.width())))
            }
            ExprKind::Call { callee, size, args } => self.call(callee, size.as_deref(), args, span, sc),
            ExprKind::Unary(op, x) => {
                let x = self.expr(x, sc)?;
                if let Some(v) = int_value(&x) {
                    return Ok(match op {
                        UnOp::Neg => int_const(v.checked_neg().ok_or_else(|| terr(span, "overflow"))?),
                        UnOp::Not => int_const(!v),
                    });
                }
                if x.ty.width().is_none() {
                    return Err(terr(span, format!("unary operator on {}", x.ty)));
                }
                let o = match op {
                    UnOp::Neg => Op::Neg,
                    UnOp::Not => Op::Not,
                };
                let ty = x.ty;
                Ok(TExpr {
                    kind: TExprKind::Prim(o, vec![x]),
                    ty,
                })
            }
            ExprKind::Binary(op, a, b) => {
                let OpSym::Op(op) = op else {
                    return Err(Diag::new(DiagKind::MacroType, span, "unexpanded operator parameter"));
                };
                let a = self.expr(a, sc)?;
                let b = self.expr(b, sc)?;
                self.binary(*op, a, b, span)
            }
            ExprKind::Cast(x, t) => {
                let x = self.expr(x, sc)?;
                let t = self.ty(t)?;
                self.cast(x, t, span)
            }
            ExprKind::Tuple(xs) => {
                let mut parts = Vec::new();
                let mut w = 0;
                for x in xs {
                    let t = self.expr(x, sc)?;
                    let pw = t.ty.width().ok_or_else(|| {
                        terr(x.span, "concatenated values need a known width; add a cast")
                    })?;
                    w += pw;
                    parts.push(t);
                }
                if w > MAX_WIDTH {
                    return Err(terr(span, "concatenation wider than 128 bits"));
                }
                let kind = match parts[0].ty {
                    Ty::Bits(k, _) => k,
                    _ => Kind::Bits,
                };
                Ok(TExpr {
                    kind: TExprKind::Concat(parts),
                    ty: Ty::Bits(kind, w),
                })
            }
            ExprKind::If(c, a, b) => {
                let c = self.expr(c, sc)?;
                let c = self.coerce(c, Ty::Bool, span)?;
                let a = self.expr(a, sc)?;
                let b = self.expr(b, sc)?;
                let (a, b, t) = self.unify(a, b, span)?;
                if let Some(v) = eval_const(&c) {
                    return Ok(if v.is_true() { a } else { b });
                }
                if t == Ty::Int {
                    return Err(terr(span, "cannot infer the width of a conditional constant"));
                }
                Ok(TExpr {
                    kind: TExprKind::If(Box::new(c), Box::new(a), Box::new(b)),
                    ty: t,
                })
            }
            ExprKind::Match {
                scrutinee,
                arms,
                default,
            } => {
                let s = self.expr(scrutinee, sc)?;
                if s.ty.width().is_none() {
                    return Err(terr(scrutinee.span, "match on an unsized value"));
                }
                let mut out = Vec::new();
                let mut ty = Ty::Int;
                let mut bodies = Vec::new();
                for (pats, body) in arms {
                    let mut vs = Vec::new();
                    for p in pats {
                        let pe = self.expr(p, sc)?;
                        let pe = self.coerce(pe, s.ty, p.span)?;
                        vs.push(eval_const(&pe).ok_or_else(|| terr(p.span, "pattern is not constant"))?);
                    }
                    let b = self.expr(body, sc)?;
                    if b.ty != Ty::Int {
                        ty = b.ty;
                    }
                    bodies.push((vs, b, body.span));
                }
                let d = self.expr(default, sc)?;
                if d.ty != Ty::Int {
                    ty = d.ty;
                }
                if ty == Ty::Int {
                    return Err(terr(span, "cannot infer the width of a match over constants"));
                }
                for (vs, b, sp) in bodies {
                    out.push((vs, self.coerce(b, ty, sp)?));
                }
                let d = self.coerce(d, ty, default.span)?;
                Ok(TExpr {
                    kind: TExprKind::Match(Box::new(s), out, Box::new(d)),
                    ty,
                })
            }
            ExprKind::Let(n, v, b) => {
                let v = self.expr(v, sc)?;
                if v.ty == Ty::Int {
                    sc.locals.push((n.text.clone(), Local::Const(v)));
                    let r = self.expr(b, sc);
                    sc.locals.pop();
                    return r;
                }
                let slot = sc.fresh();
                sc.locals.push((n.text.clone(), Local::Slot(slot, v.ty)));
                let body = self.expr(b, sc);
                sc.locals.pop();
                let body = body?;
                let ty = body.ty;
                Ok(TExpr {
                    kind: TExprKind::Let(slot, Box::new(v), Box::new(body)),
                    ty,
                })
            }
            ExprKind::Member(..) | ExprKind::Method { .. } | ExprKind::Resource(_) => Err(terr(
                span,
                "pipeline expressions are only allowed in micro architecture stages",
            )),
            ExprKind::Instantiate(_) => Err(Diag::new(
                DiagKind::MacroType,
                span,
                "model instantiations must be expanded before elaboration",
            )),
        }
    }

    fn call(
        &mut self,
        callee: &Name,
        size: Option<&ast::Expr>,
        args: &[Arg],
        span: Span,
        sc: &mut Scope,
    ) -> R<TExpr> {
        if size.is_none() {
            if let Some(base) = self.name_value(callee, sc)? {
                return self.slice(base, args, span, sc);
            }
        }
        if let Some(&f) = self.file_ids.get(&callee.text) {
            if size.is_some() {
                return Err(terr(span, "register files take no access size"));
            }
            if !sc.resources {
                return Err(terr(span, "register read in a pure context"));
            }
            let [Arg::Expr(i)] = args else {
                return Err(terr(span, format!("`{}` takes one index", callee.text)));
            };
            let (iw, ew) = (self.m.files[f].index_width, self.m.files[f].elem_width);
            let idx = self.expr(i, sc)?;
            let idx = self.coerce(idx, Ty::bits(iw), i.span)?;
            return Ok(TExpr {
                kind: TExprKind::ReadFile(f, Box::new(idx)),
                ty: Ty::bits(ew),
            });
        }
        if let Some(&m) = self.mem_ids.get(&callee.text) {
            if !sc.resources {
                return Err(terr(span, "memory read in a pure context"));
            }
            let units = match size {
                Some(s) => self.const_u32(s, sc)?,
                None => 1,
            };
            let [Arg::Expr(a)] = args else {
                return Err(terr(span, format!("`{}` takes one address", callee.text)));
            };
            let (aw, uw) = (self.m.memories[m].addr_width, self.m.memories[m].unit_width);
            if units == 0 || units * uw > MAX_WIDTH {
                return Err(terr(span, format!("unsupported access size {units}")));
            }
            let addr = self.expr(a, sc)?;
            let addr = self.coerce(addr, Ty::bits(aw), a.span)?;
            return Ok(TExpr {
                kind: TExprKind::ReadMem {
                    mem: m,
                    units,
                    addr: Box::new(addr),
                },
                ty: Ty::bits(units * uw),
            });
        }
        if self.functions.contains_key(&callee.text) {
            if size.is_some() {
                return Err(terr(span, "functions take no access size"));
            }
            if sc.depth > 32 {
                return Err(terr(span, "function calls nested too deeply (recursion?)"));
            }
            let (params, ret, body) = {
                let f = &self.functions[&callee.text];
                (f.params.clone(), f.ret, f.body.clone())
            };
            if params.len() != args.len() {
                return Err(terr(
                    span,
                    format!("`{}` takes {} arguments, {} given", callee.text, params.len(), args.len()),
                ));
            }
            let mut bound = Vec::new();
            for ((p, t), a) in params.iter().zip(args) {
                let Arg::Expr(a) = a else {
                    return Err(terr(span, "bit ranges are not function arguments"));
                };
                let v = self.expr(a, sc)?;
                let v = self.coerce(v, *t, a.span)?;
                bound.push((p.clone(), v));
            }
            // function bodies see only their parameters and global names
            let mut inner = Scope {
                next_slot: sc.next_slot,
                depth: sc.depth + 1,
                ..Scope::default()
            };
            let mut slots = Vec::new();
            for (p, v) in bound {
                let s = inner.fresh();
                inner.locals.push((p, Local::Slot(s, v.ty)));
                slots.push((s, v));
            }
            let b = self.expr(&body, &mut inner)?;
            let mut b = self.coerce(b, ret, span)?;
            sc.next_slot = inner.next_slot;
            for (s, v) in slots.into_iter().rev() {
                b = TExpr {
                    ty: b.ty,
                    kind: TExprKind::Let(s, Box::new(v), Box::new(b)),
                };
            }
            return Ok(b);
        }
        Err(nerr(callee.span, format!("unknown name `{}`", callee.text)))
    }

    // --------------------------------------------------------- statements

    fn stmt(&mut self, s: &ast::Stmt, sc: &mut Scope) -> R<TStmt> {
        let span = s.span;
        let kind = match &s.kind {
            StmtKind::Assign { target, value } => self.assign(target, value, sc)?,
            StmtKind::Let(n, v, b) => {
                let v = self.expr(v, sc)?;
                if v.ty == Ty::Int {
                    sc.locals.push((n.text.clone(), Local::Const(v)));
                    let r = self.stmt(b, sc);
                    sc.locals.pop();
                    return r;
                }
                let slot = sc.fresh();
                sc.locals.push((n.text.clone(), Local::Slot(slot, v.ty)));
                let body = self.stmt(b, sc);
                sc.locals.pop();
                TStmtKind::Let(slot, v, Box::new(body?))
            }
            StmtKind::If(c, a, b) => {
                let c = self.expr(c, sc)?;
                let c = self.coerce(c, Ty::Bool, span)?;
                let a = self.stmt(a, sc)?;
                let b = match b {
                    Some(b) => Some(Box::new(self.stmt(b, sc)?)),
                    None => None,
                };
                TStmtKind::If(c, Box::new(a), b)
            }
            StmtKind::Match {
                scrutinee,
                arms,
                default,
            } => {
                let x = self.expr(scrutinee, sc)?;
                if x.ty.width().is_none() {
                    return Err(terr(scrutinee.span, "match on an unsized value"));
                }
                let mut out = Vec::new();
                for (pats, body) in arms {
                    let mut vs = Vec::new();
                    for p in pats {
                        let pe = self.expr(p, sc)?;
                        let pe = self.coerce(pe, x.ty, p.span)?;
                        vs.push(eval_const(&pe).ok_or_else(|| terr(p.span, "pattern is not constant"))?);
                    }
                    out.push((vs, self.stmt(body, sc)?));
                }
                let d = match default {
                    Some(d) => Some(Box::new(self.stmt(d, sc)?)),
                    None => None,
                };
                TStmtKind::Match(x, out, d)
            }
            StmtKind::Block(ss) => {
                let mut out = Vec::new();
                let mut first_err = None;
                for x in ss {
                    match self.stmt(x, sc) {
                        Ok(t) => out.push(t),
                        Err(d) => {
                            if first_err.is_none() {
                                first_err = Some(d);
                            } else {
                                self.errors.push(d);
                            }
                        }
                    }
                }
                if let Some(d) = first_err {
                    return Err(d);
                }
                TStmtKind::Block(out)
            }
            StmtKind::Raise(_) => {
                return Err(Diag::new(
                    DiagKind::UnsupportedFeature,
                    span,
                    "`raise` in instruction behavior (exceptions are not supported)",
                ))
            }
            StmtKind::Forall(_) => {
                return Err(Diag::new(DiagKind::UnsupportedFeature, span, "`forall` is not supported"))
            }
            StmtKind::Expr(_) => {
                return Err(terr(span, "expression statements are only allowed in micro architecture stages"))
            }
            StmtKind::Hole(_) | StmtKind::Instantiate(_) => {
                return Err(Diag::new(DiagKind::MacroType, span, "unexpanded model use"))
            }
        };
        Ok(TStmt { kind, span })
    }

    fn assign(&mut self, target: &ast::Expr, value: &ast::Expr, sc: &mut Scope) -> R<TStmtKind> {
        let span = target.span;
        match &target.kind {
            ExprKind::Name(n) => {
                if let Some(pc) = &self.m.pc {
                    if pc.name == n.text {
                        let w = pc.width;
                        let v = self.expr(value, sc)?;
                        let v = self.coerce(v, Ty::bits(w), value.span)?;
                        return Ok(TStmtKind::WritePc(v));
                    }
                }
                if let Some(&r) = self.reg_ids.get(&n.text) {
                    let w = self.m.registers[r].width;
                    let v = self.expr(value, sc)?;
                    let v = self.coerce(v, Ty::bits(w), value.span)?;
                    return Ok(TStmtKind::WriteReg(r, v));
                }
                Err(terr(span, format!("cannot assign to `{}`", n.text)))
            }
            ExprKind::Call { callee, size, args } => {
                if let Some(&f) = self.file_ids.get(&callee.text) {
                    let [Arg::Expr(i)] = args.as_slice() else {
                        return Err(terr(span, format!("`{}` takes one index", callee.text)));
                    };
                    if size.is_some() {
                        return Err(terr(span, "register files take no access size"));
                    }
                    let (iw, ew) = (self.m.files[f].index_width, self.m.files[f].elem_width);
                    let idx = self.expr(i, sc)?;
                    let idx = self.coerce(idx, Ty::bits(iw), i.span)?;
                    let v = self.expr(value, sc)?;
                    let v = self.coerce(v, Ty::bits(ew), value.span)?;
                    return Ok(TStmtKind::WriteFile(f, idx, v));
                }
                if let Some(&m) = self.mem_ids.get(&callee.text) {
                    let units = match size {
                        Some(s) => self.const_u32(s, sc)?,
                        None => 1,
                    };
                    let [Arg::Expr(a)] = args.as_slice() else {
                        return Err(terr(span, format!("`{}` takes one address", callee.text)));
                    };
                    let (aw, uw) = (self.m.memories[m].addr_width, self.m.memories[m].unit_width);
                    if units == 0 || units * uw > MAX_WIDTH {
                        return Err(terr(span, format!("unsupported access size {units}")));
                    }
                    let addr = self.expr(a, sc)?;
                    let addr = self.coerce(addr, Ty::bits(aw), a.span)?;
                    let v = self.expr(value, sc)?;
                    let v = self.coerce(v, Ty::bits(units * uw), value.span)?;
                    return Ok(TStmtKind::WriteMem {
                        mem: m,
                        units,
                        addr,
                        value: v,
                    });
                }
                Err(terr(span, format!("cannot assign to `{}`", callee.text)))
            }
            _ => Err(terr(span, "assignment target must be a register, register file element, memory location or the program counter")),
        }
    }

    // ------------------------------------------------------- instructions

    fn instructions(&mut self, defs: &[&Def]) {
        let mut encodings: HashMap<String, (&Vec<EncItem>, Span)> = HashMap::new();
        let mut assemblies: HashMap<String, (&ast::Expr, Span)> = HashMap::new();
        let mut instrs: Vec<(&Def, &Name, &Name, &ast::Stmt)> = Vec::new();
        for d in defs {
            match &d.kind {
                DefKind::Instruction { name, format, body } => {
                    self.declare(name);
                    instrs.push((d, name, format, body));
                }
                DefKind::Encoding { name, items } => {
                    if encodings.insert(name.text.clone(), (items, name.span)).is_some() {
                        self.errors.push(nerr(
                            name.span,
                            format!("instruction `{}` has more than one encoding", name.text),
                        ));
                    }
                }
                DefKind::Assembly { names, body } => {
                    for n in names {
                        if assemblies.insert(n.text.clone(), (body, n.span)).is_some() {
                            self.errors.push(nerr(
                                n.span,
                                format!("instruction `{}` has more than one assembly", n.text),
                            ));
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        for (n, (_, sp)) in &encodings {
            if !instrs.iter().any(|(_, i, _, _)| &i.text == n) {
                self.errors
                    .push(nerr(*sp, format!("encoding for unknown instruction `{n}`")));
            }
        }
        for (n, (_, sp)) in &assemblies {
            if !instrs.iter().any(|(_, i, _, _)| &i.text == n) {
                self.errors
                    .push(nerr(*sp, format!("assembly for unknown instruction `{n}`")));
            }
        }
        for (d, name, format, body) in instrs {
            let Some(&fi) = self.format_ids.get(&format.text) else {
                self.errors
                    .push(nerr(format.span, format!("unknown format `{}`", format.text)));
                continue;
            };
            let mut sc = Scope {
                format: Some(fi),
                resources: true,
                ..Scope::default()
            };
            let behavior = match self.stmt(body, &mut sc) {
                Ok(b) => b,
                Err(e) => {
                    self.errors.push(e);
                    continue;
                }
            };
            self.errors.extend(check_read_write(&behavior, &self.m));
            let encoding = match encodings.get(&name.text) {
                Some((items, _)) => {
                    let r = self.encoding(fi, items);
                    self.report(r).unwrap_or_default()
                }
                None => {
                    self.errors.push(nerr(
                        name.span,
                        format!("instruction `{}` has no encoding", name.text),
                    ));
                    Vec::new()
                }
            };
            let assembly = match assemblies.get(&name.text) {
                Some((body, _)) => {
                    let r = self.assembly(fi, &behavior, body);
                    self.report(r).unwrap_or(AsmExpr::Mnemonic)
                }
                None => {
                    self.errors.push(nerr(
                        name.span,
                        format!("instruction `{}` has no assembly", name.text),
                    ));
                    AsmExpr::Mnemonic
                }
            };
            let mut tags = Vec::new();
            for a in &d.annotations {
                for x in &a.items {
                    if let ExprKind::Name(n) = &x.kind {
                        tags.push(n.text.clone());
                    }
                }
            }
            self.m.instructions.push(Instruction {
                name: name.text.clone(),
                format: fi,
                behavior,
                encoding,
                assembly,
                tags,
                span: name.span,
            });
        }
    }

    fn encoding(&mut self, fi: usize, items: &[EncItem]) -> R<Vec<(usize, Value)>> {
        let mut out: Vec<(usize, Value)> = Vec::new();
        for it in items {
            let EncItem::Field { name, value } = it else {
                return Err(Diag::new(DiagKind::MacroType, Span::default(), "unexpanded encoding item"));
            };
            let fmt = &self.m.formats[fi];
            let Some(f) = fmt.field_index(&name.text) else {
                return Err(nerr(
                    name.span,
                    format!("`{}` is not a field of format `{}`", name.text, fmt.name),
                ));
            };
            if out.iter().any(|(g, _)| *g == f) {
                return Err(nerr(name.span, format!("field `{}` encoded twice", name.text)));
            }
            let mut sc = Scope::default();
            let e = self.expr(value, &mut sc)?;
            let v = match int_value(&e) {
                Some(i) if i < 0 => return Err(terr(value.span, "negative encoding constant")),
                Some(i) => Value::new(i as u128, MAX_WIDTH),
                None => eval_const(&e).ok_or_else(|| terr(value.span, "encoding value is not constant"))?,
            };
            out.push((f, v));
        }
        Ok(out)
    }

    fn operand(&self, fi: usize, e: &ast::Expr) -> R<Operand> {
        let fmt = &self.m.formats[fi];
        let ExprKind::Name(n) = &e.kind else {
            return Err(terr(e.span, "expected a format field or access function"));
        };
        if let Some(i) = fmt.field_index(&n.text) {
            return Ok(Operand::Field(i));
        }
        if let Some(i) = fmt.access_index(&n.text) {
            return Ok(Operand::Access(i));
        }
        Err(nerr(
            n.span,
            format!("`{}` is not a field or access function of `{}`", n.text, fmt.name),
        ))
    }

    fn register_file_for(&self, behavior: &TStmt, op: Operand, span: Span) -> R<usize> {
        if self.m.files.len() == 1 {
            return Ok(0);
        }
        let mut found = None;
        let want = match op {
            Operand::Field(i) => TExprKind::Field(i),
            Operand::Access(i) => TExprKind::Access(i),
        };
        visit_stmt_exprs(behavior, &mut |e: &TExpr| {
            if let TExprKind::ReadFile(f, i) = &e.kind {
                if i.kind == want {
                    found = Some(*f);
                }
            }
        });
        visit_stmt(behavior, &mut |s: &TStmt| {
            if let TStmtKind::WriteFile(f, i, _) = &s.kind {
                if i.kind == want {
                    found = Some(*f);
                }
            }
        });
        found.ok_or_else(|| terr(span, "cannot tell which register file this operand names"))
    }

    fn assembly(&mut self, fi: usize, behavior: &TStmt, e: &ast::Expr) -> R<AsmExpr> {
        let span = e.span;
        Ok(match &e.kind {
            ExprKind::Str(s) => AsmExpr::Lit(s.clone()),
            ExprKind::Name(n) if n.text == "mnemonic" => AsmExpr::Mnemonic,
            ExprKind::Tuple(xs) => {
                let mut parts = Vec::new();
                for x in xs {
                    parts.push(self.assembly(fi, behavior, x)?);
                }
                AsmExpr::Concat(parts)
            }
            ExprKind::Call { callee, size: None, args } if args.len() == 1 => {
                let Arg::Expr(a) = &args[0] else {
                    return Err(terr(span, "unexpected bit range"));
                };
                match callee.text.as_str() {
                    "register" => {
                        let op = self.operand(fi, a)?;
                        let file = self.register_file_for(behavior, op, span)?;
                        AsmExpr::Register { file, operand: op }
                    }
                    "decimal" => AsmExpr::Decimal(self.operand(fi, a)?),
                    "hex" => AsmExpr::Hex(self.operand(fi, a)?),
                    other => {
                        return Err(nerr(
                            callee.span,
                            format!("unknown assembly function `{other}`"),
                        ))
                    }
                }
            }
            ExprKind::If(c, a, b) => {
                let mut sc = Scope {
                    format: Some(fi),
                    ..Scope::default()
                };
                let c = self.expr(c, &mut sc)?;
                let c = self.coerce(c, Ty::Bool, span)?;
                AsmExpr::If(
                    c,
                    Box::new(self.assembly(fi, behavior, a)?),
                    Box::new(self.assembly(fi, behavior, b)?),
                )
            }
            ExprKind::Match {
                scrutinee,
                arms,
                default,
            } => {
                let mut sc = Scope {
                    format: Some(fi),
                    ..Scope::default()
                };
                let s = self.expr(scrutinee, &mut sc)?;
                if s.ty.width().is_none() {
                    return Err(terr(span, "match on an unsized value"));
                }
                let mut out = Vec::new();
                for (pats, body) in arms {
                    let mut vs = Vec::new();
                    for p in pats {
                        let pe = self.expr(p, &mut sc)?;
                        let pe = self.coerce(pe, s.ty, p.span)?;
                        vs.push(eval_const(&pe).ok_or_else(|| terr(p.span, "pattern is not constant"))?);
                    }
                    out.push((vs, self.assembly(fi, behavior, body)?));
                }
                AsmExpr::Match(s, out, Box::new(self.assembly(fi, behavior, default)?))
            }
            _ => {
                return Err(terr(
                    span,
                    "unsupported assembly expression; use strings, mnemonic, register, decimal, hex, if or match",
                ))
            }
        })
    }

    // ------------------------------------------------- micro architecture

    fn mia(&mut self, name: &Name, items: &[MiaItem], anns: &[Annotation], span: Span) -> Option<MiaSpec> {
        let mut spec = MiaSpec {
            name: name.text.clone(),
            stages: Vec::new(),
            logic: Vec::new(),
            data_bus_width: None,
            unified_memory: false,
            span,
        };
        for a in anns {
            for x in &a.items {
                match &x.kind {
                    ExprKind::Binary(OpSym::Op(BinOp::Eq), l, r)
                        if matches!(&l.kind, ExprKind::Name(n) if n.text == "dataBusWidth") =>
                    {
                        match r.kind {
                            ExprKind::Int { value, .. } if value > 0 && value <= 1024 => {
                                spec.data_bus_width = Some(value as u32)
                            }
                            _ => self.errors.push(terr(r.span, "dataBusWidth must be a positive integer")),
                        }
                    }
                    ExprKind::Name(n) if n.text == "unifiedMemory" => spec.unified_memory = true,
                    _ => self.m.warnings.push(format!(
                        "{}: ignoring annotation on micro architecture `{}`",
                        a.span, name.text
                    )),
                }
            }
        }
        for it in items {
            if let MiaItem::Logic {
                name: l,
                annotations,
                ..
            } = it
            {
                let forwarding = annotations
                    .iter()
                    .any(|a| a.items.iter().any(|x| matches!(&x.kind, ExprKind::Name(n) if n.text == "forwarding")));
                if !forwarding {
                    self.errors.push(Diag::new(
                        DiagKind::UnsupportedFeature,
                        l.span,
                        format!("logic element `{}` has no supported kind (expected `[forwarding]`)", l.text),
                    ));
                }
                spec.logic.push(Logic {
                    name: l.text.clone(),
                    forwarding,
                });
            }
        }
        let stage_defs: Vec<&StageDef> = items
            .iter()
            .filter_map(|i| match i {
                MiaItem::Stage(s) => Some(s),
                _ => None,
            })
            .collect();
        let names: Vec<String> = stage_defs.iter().map(|s| s.name.text.clone()).collect();
        let mut stages = Vec::new();
        let n_errors = self.errors.len();
        for s in &stage_defs {
            let mut st = Stage {
                name: s.name.text.clone(),
                fetch: false,
                decode: false,
                ops: Vec::new(),
                inputs: Vec::new(),
                span: s.span,
            };
            let r = self.stage_stmt(&s.body, &mut st, &names, &spec.logic, false);
            self.report(r);
            stages.push(st);
        }
        if self.errors.len() > n_errors {
            return None;
        }
        // order stages by their data dependencies, ties in textual order
        let n = stages.len();
        let mut placed = vec![false; n];
        let mut order = Vec::new();
        while order.len() < n {
            let next = (0..n).find(|&i| !placed[i] && stages[i].inputs.iter().all(|&j| placed[j]));
            match next {
                Some(i) => {
                    placed[i] = true;
                    order.push(i);
                }
                None => {
                    self.errors.push(terr(span, format!("stages of `{}` depend on each other cyclically", name.text)));
                    return None;
                }
            }
        }
        let remap: HashMap<usize, usize> = order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let mut ordered: Vec<Stage> = order.iter().map(|&i| stages[i].clone()).collect();
        for s in &mut ordered {
            s.inputs = s.inputs.iter().map(|i| remap[i]).collect();
        }
        let fetches = ordered.iter().filter(|s| s.fetch).count();
        let decodes = ordered.iter().filter(|s| s.decode).count();
        if fetches != 1 || decodes != 1 {
            self.errors.push(terr(
                span,
                format!(
                    "`{}` needs exactly one `fetchNext` and one `decode` (found {fetches} and {decodes})",
                    name.text
                ),
            ));
            return None;
        }
        for (i, s) in ordered.iter().enumerate() {
            if i > 0 && !s.inputs.contains(&(i - 1)) {
                self.errors.push(terr(
                    s.span,
                    format!("stage `{}` does not consume the output of `{}`", s.name, ordered[i - 1].name),
                ));
                return None;
            }
        }
        spec.stages = ordered;
        Some(spec)
    }

    fn stage_input(&mut self, e: &ast::Expr, st: &mut Stage, names: &[String]) -> R<()> {
        match &e.kind {
            ExprKind::Member(base, _) => {
                if let ExprKind::Name(n) = &base.kind {
                    if let Some(i) = names.iter().position(|x| *x == n.text) {
                        if !st.inputs.contains(&i) {
                            st.inputs.push(i);
                        }
                        return Ok(());
                    }
                }
                Err(nerr(e.span, "unknown stage output"))
            }
            ExprKind::Name(n) if n.text == "fetchNext" => {
                st.fetch = true;
                Ok(())
            }
            ExprKind::Name(_) => Ok(()),
            ExprKind::Call { callee, args, .. } if callee.text == "decode" => {
                st.decode = true;
                for a in args {
                    if let Arg::Expr(x) = a {
                        self.stage_input(x, st, names)?;
                    }
                }
                Ok(())
            }
            _ => Err(terr(e.span, "unsupported expression in stage")),
        }
    }

    fn resource_ref(&self, e: &ast::Expr) -> R<Resource> {
        let ExprKind::Resource(n) = &e.kind else {
            return Err(terr(e.span, "expected a resource reference `@R`"));
        };
        if let Some(pc) = &self.m.pc {
            if pc.name == n.text {
                return Ok(Resource::Pc);
            }
        }
        if let Some(&i) = self.file_ids.get(&n.text) {
            return Ok(Resource::File(i));
        }
        if let Some(&i) = self.reg_ids.get(&n.text) {
            return Ok(Resource::Reg(i));
        }
        if let Some(&i) = self.mem_ids.get(&n.text) {
            return Ok(Resource::Mem(i));
        }
        Err(nerr(n.span, format!("unknown resource `{}`", n.text)))
    }

    fn stage_stmt(&mut self, s: &ast::Stmt, st: &mut Stage, names: &[String], logic: &[Logic], guarded: bool) -> R<()> {
        match &s.kind {
            StmtKind::Let(_, v, b) => {
                self.stage_input(v, st, names)?;
                self.stage_stmt(b, st, names, logic, guarded)
            }
            StmtKind::Block(ss) => {
                for x in ss {
                    self.stage_stmt(x, st, names, logic, guarded)?;
                }
                Ok(())
            }
            StmtKind::Assign { value, .. } => self.stage_input(value, st, names),
            StmtKind::If(c, a, b) => {
                let unknown = matches!(&c.kind, ExprKind::Member(_, m) if m.text == "unknown");
                let raises = matches!(&a.kind, StmtKind::Raise(n) if n.text == "invalid");
                if !unknown || !raises {
                    return Err(Diag::new(
                        DiagKind::UnsupportedFeature,
                        s.span,
                        "only `if instr.unknown then raise invalid` is supported in stages",
                    ));
                }
                st.ops.push((MapOp::UnknownCheck, s.span));
                if let Some(b) = b {
                    self.stage_stmt(b, st, names, logic, true)?;
                }
                Ok(())
            }
            StmtKind::Expr(e) => {
                let (method, args) = match &e.kind {
                    ExprKind::Method { method, args, .. } => (method, args.as_slice()),
                    ExprKind::Member(_, m) => (m, &[][..]),
                    _ => return Err(terr(e.span, "unsupported stage statement")),
                };
                let op = match (method.text.as_str(), args) {
                    ("compute", []) => MapOp::Compute,
                    ("verify", []) => MapOp::Verify,
                    ("read", [r]) => MapOp::Read(self.resource_ref(r)?),
                    ("write", [r]) => MapOp::Write(self.resource_ref(r)?),
                    ("readOrForward", [r, l]) => {
                        let res = self.resource_ref(r)?;
                        let ExprKind::Resource(ln) = &l.kind else {
                            return Err(terr(l.span, "expected a logic element `@name`"));
                        };
                        let li = logic
                            .iter()
                            .position(|x| x.name == ln.text)
                            .ok_or_else(|| nerr(ln.span, format!("unknown logic element `{}`", ln.text)))?;
                        MapOp::ReadOrForward(res, li)
                    }
                    (m, _) => {
                        return Err(Diag::new(
                            DiagKind::UnsupportedFeature,
                            method.span,
                            format!("unsupported instruction mapping `{m}`"),
                        ))
                    }
                };
                let _ = guarded;
                st.ops.push((op, e.span));
                Ok(())
            }
            StmtKind::Raise(_) => Err(Diag::new(
                DiagKind::UnsupportedFeature,
                s.span,
                "`raise` outside an unknown-instruction check",
            )),
            _ => Err(terr(s.span, "unsupported stage statement")),
        }
    }

    fn processor(&mut self, name: &Name, items: &[(Name, ast::Expr)]) {
        let mut p = Processor {
            name: name.text.clone(),
            start: None,
            stop_pc: None,
        };
        for (k, v) in items {
            let mut sc = Scope::default();
            match k.text.as_str() {
                "start" => {
                    let r = self.expr(v, &mut sc).and_then(|e| {
                        int_value(&e)
                            .map(|i| i as u128)
                            .or_else(|| eval_const(&e).map(|x| x.bits()))
                            .ok_or_else(|| terr(v.span, "start address must be constant"))
                    });
                    p.start = self.report(r);
                }
                "stop" => {
                    let ExprKind::Binary(OpSym::Op(BinOp::Eq), l, r) = &v.kind else {
                        self.errors.push(Diag::new(
                            DiagKind::UnsupportedFeature,
                            v.span,
                            "only `stop = PC = address` is supported",
                        ));
                        continue;
                    };
                    let is_pc = matches!(&l.kind, ExprKind::Name(n) if self.m.pc.as_ref().map(|p| p.name == n.text).unwrap_or(false));
                    if !is_pc {
                        self.errors.push(Diag::new(
                            DiagKind::UnsupportedFeature,
                            l.span,
                            "stop condition must compare the program counter",
                        ));
                        continue;
                    }
                    let res = self.expr(r, &mut sc).and_then(|e| {
                        int_value(&e)
                            .map(|i| i as u128)
                            .or_else(|| eval_const(&e).map(|x| x.bits()))
                            .ok_or_else(|| terr(r.span, "stop address must be constant"))
                    });
                    p.stop_pc = self.report(res);
                }
                other => self.errors.push(Diag::new(
                    DiagKind::UnsupportedFeature,
                    k.span,
                    format!("unsupported processor setting `{other}`"),
                )),
            }
        }
        self.m.processor = Some(p);
    }
}

/// Splits `a & b & c` into its conjuncts.
fn conjuncts(e: &ast::Expr) -> Vec<&ast::Expr> {
    match &e.kind {
        ExprKind::Binary(OpSym::Op(BinOp::And | BinOp::LogAnd), a, b) => {
            let mut v = conjuncts(a);
            v.extend(conjuncts(b));
            v
        }
        _ => vec![e],
    }
}

fn literal(e: &ast::Expr) -> Option<i128> {
    match &e.kind {
        ExprKind::Int { value, .. } => i128::try_from(*value).ok(),
        ExprKind::Unary(UnOp::Neg, x) => literal(x).map(|v| -v),
        _ => None,
    }
}

/// Readable failure text for one predicate conjunct.
fn describe_clause(c: &ast::Expr, operand: &str) -> String {
    let is_op = |x: &ast::Expr| matches!(&x.kind, ExprKind::Name(n) if n.text == operand);
    if let ExprKind::Binary(OpSym::Op(op), l, r) = &c.kind {
        // x(k..0) = 0
        if *op == BinOp::Eq && literal(r) == Some(0) {
            if let ExprKind::Call { callee, args, size: None } = &l.kind {
                if callee.text == operand {
                    if let [Arg::Range(h, lo)] = args.as_slice() {
                        if let (Some(h), Some(0)) = (literal(h), literal(lo)) {
                            if (0..126).contains(&h) {
                                return format!("must be a multiple of {}", 1u128 << (h + 1));
                            }
                        }
                    }
                }
            }
        }
        if is_op(l) {
            if let Some(v) = literal(r) {
                match op {
                    BinOp::Ge => return format!("must be at least {v}"),
                    BinOp::Gt => return format!("must be greater than {v}"),
                    BinOp::Le => return format!("must be at most {v}"),
                    BinOp::Lt => return format!("must be less than {v}"),
                    BinOp::Ne => return format!("must not be {v}"),
                    _ => {}
                }
            }
        }
    }
    format!("must satisfy `{}`", print_expr(c))
}

/// `Field(f)` or a plain extension of it.
fn trivial_inverse(body: &TExpr) -> Option<(usize, bool)> {
    match &body.kind {
        TExprKind::Field(f) => Some((*f, false)),
        TExprKind::Cast(CastKind::ZExt, x) => match x.kind {
            TExprKind::Field(f) => Some((f, false)),
            _ => None,
        },
        TExprKind::Cast(CastKind::SExt, x) => match x.kind {
            TExprKind::Field(f) => Some((f, true)),
            _ => None,
        },
        _ => None,
    }
}

pub fn visit_stmt(s: &TStmt, f: &mut dyn FnMut(&TStmt)) {
    f(s);
    match &s.kind {
        TStmtKind::Let(_, _, b) => visit_stmt(b, f),
        TStmtKind::If(_, a, b) => {
            visit_stmt(a, f);
            if let Some(b) = b {
                visit_stmt(b, f);
            }
        }
        TStmtKind::Match(_, arms, d) => {
            arms.iter().for_each(|(_, x)| visit_stmt(x, f));
            if let Some(d) = d {
                visit_stmt(d, f);
            }
        }
        TStmtKind::Block(ss) => ss.iter().for_each(|x| visit_stmt(x, f)),
        _ => {}
    }
}

/// Visits every expression (and subexpression) of a statement tree.
pub fn visit_stmt_exprs(s: &TStmt, f: &mut dyn FnMut(&TExpr)) {
    visit_stmt(s, &mut |st| match &st.kind {
        TStmtKind::WritePc(v) | TStmtKind::WriteReg(_, v) | TStmtKind::Let(_, v, _) | TStmtKind::If(v, _, _) | TStmtKind::Match(v, _, _) => {
            v.visit(f)
        }
        TStmtKind::WriteFile(_, i, v) => {
            i.visit(f);
            v.visit(f);
        }
        TStmtKind::WriteMem { addr, value, .. } => {
            addr.visit(f);
            value.visit(f);
        }
        TStmtKind::Block(_) => {}
    });
}
