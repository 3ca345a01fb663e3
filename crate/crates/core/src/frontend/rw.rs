//! Read/write discipline of instruction behavior.
//!
//! Along every control path, a resource element may be written at most once
//! and may not be read after it was written.

use super::ast::Span;
use super::error::{Diag, DiagKind};
use super::eval::eval_const;
use super::model::*;

#[derive(Clone)]
struct Access {
    res: Resource,
    index: Option<TExpr>,
}

fn reads(e: &TExpr) -> Vec<Access> {
    let mut out = Vec::new();
    e.visit(&mut |x| match &x.kind {
        TExprKind::ReadPc => out.push(Access {
            res: Resource::Pc,
            index: None,
        }),
        TExprKind::ReadReg(r) => out.push(Access {
            res: Resource::Reg(*r),
            index: None,
        }),
        TExprKind::ReadFile(f, i) => out.push(Access {
            res: Resource::File(*f),
            index: Some((**i).clone()),
        }),
        TExprKind::ReadMem { mem, addr, .. } => out.push(Access {
            res: Resource::Mem(*mem),
            index: Some((**addr).clone()),
        }),
        _ => {}
    });
    out
}

fn distinct_constants(a: &Option<TExpr>, b: &Option<TExpr>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => match (eval_const(a), eval_const(b)) {
            (Some(x), Some(y)) => x.bits() != y.bits(),
            _ => false,
        },
        _ => false,
    }
}

struct Checker<'a> {
    model: &'a SpecModel,
    errors: Vec<Diag>,
}

impl Checker<'_> {
    fn name(&self, a: &Access) -> String {
        self.model.resource_name(a.res).to_string()
    }

    fn check_reads(&mut self, exprs: &[&TExpr], written: &[Access], span: Span) {
        for e in exprs {
            for r in reads(e) {
                for w in written.iter().filter(|w| w.res == r.res) {
                    let ok = matches!(r.res, Resource::File(_) | Resource::Mem(_))
                        && distinct_constants(&r.index, &w.index);
                    if !ok {
                        let msg = format!("`{}` is read after it was written", self.name(&r));
                        self.errors.push(Diag::new(DiagKind::WriteBeforeRead, span, msg));
                    }
                }
            }
        }
    }

    fn write(&mut self, w: Access, written: &mut Vec<Access>, span: Span) {
        for prev in written.iter().filter(|p| p.res == w.res) {
            let clash = match w.res {
                Resource::Pc | Resource::Reg(_) => true,
                _ => prev.index == w.index,
            };
            if clash {
                let msg = format!("`{}` is written twice on one path", self.name(&w));
                self.errors.push(Diag::new(DiagKind::DoubleWrite, span, msg));
            }
        }
        written.push(w);
    }

    /// Returns the write sets of all paths leaving `s`.
    fn stmt(&mut self, s: &TStmt, written: Vec<Access>) -> Vec<Vec<Access>> {
        match &s.kind {
            TStmtKind::WritePc(v) => {
                let mut w = written;
                self.check_reads(&[v], &w, s.span);
                self.write(Access { res: Resource::Pc, index: None }, &mut w, s.span);
                vec![w]
            }
            TStmtKind::WriteReg(r, v) => {
                let mut w = written;
                self.check_reads(&[v], &w, s.span);
                self.write(Access { res: Resource::Reg(*r), index: None }, &mut w, s.span);
                vec![w]
            }
            TStmtKind::WriteFile(f, i, v) => {
                let mut w = written;
                self.check_reads(&[i, v], &w, s.span);
                let a = Access { res: Resource::File(*f), index: Some(i.clone()) };
                self.write(a, &mut w, s.span);
                vec![w]
            }
            TStmtKind::WriteMem { mem, addr, value, .. } => {
                let mut w = written;
                self.check_reads(&[addr, value], &w, s.span);
                let a = Access { res: Resource::Mem(*mem), index: Some(addr.clone()) };
                self.write(a, &mut w, s.span);
                vec![w]
            }
            TStmtKind::Let(_, v, b) => {
                self.check_reads(&[v], &written, s.span);
                self.stmt(b, written)
            }
            TStmtKind::If(c, a, b) => {
                self.check_reads(&[c], &written, s.span);
                let mut out = self.stmt(a, written.clone());
                match b {
                    Some(b) => out.extend(self.stmt(b, written)),
                    None => out.push(written),
                }
                out
            }
            TStmtKind::Match(x, arms, d) => {
                self.check_reads(&[x], &written, s.span);
                let mut out = Vec::new();
                for (_, arm) in arms {
                    out.extend(self.stmt(arm, written.clone()));
                }
                match d {
                    Some(d) => out.extend(self.stmt(d, written)),
                    None => out.push(written),
                }
                out
            }
            TStmtKind::Block(ss) => {
                let mut paths = vec![written];
                for x in ss {
                    let mut next = Vec::new();
                    for p in paths {
                        next.extend(self.stmt(x, p));
                    }
                    // paths with equal write sets behave identically from here on
                    next.dedup_by(|a, b| same_writes(a, b));
                    paths = next;
                }
                paths
            }
        }
    }
}

fn same_writes(a: &[Access], b: &[Access]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.res == y.res && x.index == y.index)
}

/// Diagnostics for every read-after-write and double write in `behavior`.
pub fn check_read_write(behavior: &TStmt, model: &SpecModel) -> Vec<Diag> {
    let mut c = Checker {
        model,
        errors: Vec::new(),
    };
    c.stmt(behavior, Vec::new());
    c.errors.dedup();
    c.errors
}
