//! Direct evaluation of typed expressions.

use super::model::{TExpr, TExprKind, Ty};
use crate::value::Value;

/// Leaf values an expression may need. `None` means "not available here".
pub trait Leaves {
    fn field(&mut self, _i: usize) -> Option<Value> {
        None
    }
    fn access(&mut self, _i: usize) -> Option<Value> {
        None
    }
    fn pc(&mut self) -> Option<Value> {
        None
    }
    fn reg(&mut self, _r: usize) -> Option<Value> {
        None
    }
    fn file(&mut self, _f: usize, _idx: Value) -> Option<Value> {
        None
    }
    fn mem(&mut self, _m: usize, _units: u32, _addr: Value) -> Option<Value> {
        None
    }
}

pub struct NoLeaves;

impl Leaves for NoLeaves {}

/// Locals are indexed by slot; missing slots evaluate to `None`.
pub fn eval(e: &TExpr, leaves: &mut dyn Leaves, locals: &mut Vec<Option<Value>>) -> Option<Value> {
    Some(match &e.kind {
        TExprKind::Const(v) => *v,
        TExprKind::Field(i) => leaves.field(*i)?,
        TExprKind::Access(i) => leaves.access(*i)?,
        TExprKind::Var(s) => (*locals.get(*s as usize)?)?,
        TExprKind::ReadPc => leaves.pc()?,
        TExprKind::ReadReg(r) => leaves.reg(*r)?,
        TExprKind::ReadFile(f, i) => {
            let idx = eval(i, leaves, locals)?;
            leaves.file(*f, idx)?
        }
        TExprKind::ReadMem { mem, units, addr } => {
            let a = eval(addr, leaves, locals)?;
            leaves.mem(*mem, *units, a)?
        }
        TExprKind::Prim(op, args) => {
            let vs: Option<Vec<Value>> = args.iter().map(|a| eval(a, leaves, locals)).collect();
            op.apply(&vs?)
        }
        TExprKind::Cast(k, x) => k.apply(eval(x, leaves, locals)?, e.width()),
        TExprKind::Slice(x, hi, lo) => eval(x, leaves, locals)?.slice(*hi, *lo),
        TExprKind::Concat(xs) => {
            let mut acc: Option<Value> = None;
            for x in xs {
                let v = eval(x, leaves, locals)?;
                acc = Some(match acc {
                    None => v,
                    Some(a) => a.concat(v),
                });
            }
            acc?
        }
        TExprKind::If(c, a, b) => {
            if eval(c, leaves, locals)?.is_true() {
                eval(a, leaves, locals)?
            } else {
                eval(b, leaves, locals)?
            }
        }
        TExprKind::Match(s, arms, d) => {
            let v = eval(s, leaves, locals)?;
            match arms.iter().find(|(pats, _)| pats.iter().any(|p| p.bits() == v.bits())) {
                Some((_, body)) => eval(body, leaves, locals)?,
                None => eval(d, leaves, locals)?,
            }
        }
        TExprKind::Let(slot, v, body) => {
            let x = eval(v, leaves, locals)?;
            let s = *slot as usize;
            if locals.len() <= s {
                locals.resize(s + 1, None);
            }
            locals[s] = Some(x);
            eval(body, leaves, locals)?
        }
    })
}

/// Value of a leaf-free expression, if it has one.
pub fn eval_const(e: &TExpr) -> Option<Value> {
    if e.ty == Ty::Int {
        if let TExprKind::Const(v) = e.kind {
            return Some(v);
        }
    }
    eval(e, &mut NoLeaves, &mut Vec::new())
}

/// Replaces leaf-free subtrees by constants.
pub fn fold(e: &TExpr) -> TExpr {
    if e.ty != Ty::Int && e.ty != Ty::Str && !matches!(e.kind, TExprKind::Const(_)) {
        if let Some(v) = eval(e, &mut NoLeaves, &mut Vec::new()) {
            return TExpr::constant(v, e.ty);
        }
    }
    let kind = match &e.kind {
        TExprKind::ReadFile(f, i) => TExprKind::ReadFile(*f, Box::new(fold(i))),
        TExprKind::ReadMem { mem, units, addr } => TExprKind::ReadMem {
            mem: *mem,
            units: *units,
            addr: Box::new(fold(addr)),
        },
        TExprKind::Prim(op, xs) => TExprKind::Prim(*op, xs.iter().map(fold).collect()),
        TExprKind::Cast(k, x) => TExprKind::Cast(*k, Box::new(fold(x))),
        TExprKind::Slice(x, h, l) => TExprKind::Slice(Box::new(fold(x)), *h, *l),
        TExprKind::Concat(xs) => TExprKind::Concat(xs.iter().map(fold).collect()),
        TExprKind::If(a, b, c) => {
            TExprKind::If(Box::new(fold(a)), Box::new(fold(b)), Box::new(fold(c)))
        }
        TExprKind::Match(s, arms, d) => TExprKind::Match(
            Box::new(fold(s)),
            arms.iter().map(|(p, x)| (p.clone(), fold(x))).collect(),
            Box::new(fold(d)),
        ),
        TExprKind::Let(s, v, b) => TExprKind::Let(*s, Box::new(fold(v)), Box::new(fold(b))),
        other => other.clone(),
    };
    TExpr { kind, ty: e.ty }
}
