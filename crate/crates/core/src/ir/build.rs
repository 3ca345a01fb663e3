//! Lowering of typed behavior into behavior graphs, and canonicalization.

use std::collections::HashMap;

use super::eval::apply_pure;
use super::graph::*;
use crate::frontend::model::*;
use crate::value::{mask, Value};

/// Hash-consing node store. With `fold` set, constant subtrees and algebraic
/// identities are simplified on insertion.
struct Store {
    nodes: Vec<Node>,
    memo: HashMap<Node, NodeId>,
    fold: bool,
}

impl Store {
    fn new(fold: bool) -> Self {
        Store {
            nodes: Vec::new(),
            memo: HashMap::new(),
            fold,
        }
    }

    fn konst(&mut self, v: Value) -> NodeId {
        self.raw(NodeKind::Const(v), Vec::new(), v.width())
    }

    fn raw(&mut self, kind: NodeKind, args: Vec<NodeId>, width: u32) -> NodeId {
        let n = Node { kind, args, width };
        if let Some(&id) = self.memo.get(&n) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(n.clone());
        self.memo.insert(n, id);
        id
    }

    fn const_of(&self, id: NodeId) -> Option<Value> {
        match self.nodes[id].kind {
            NodeKind::Const(v) => Some(v),
            _ => None,
        }
    }

    fn add(&mut self, kind: NodeKind, mut args: Vec<NodeId>, width: u32) -> NodeId {
        if let NodeKind::Builtin(op) = &kind {
            if op.is_commutative() {
                args.sort_unstable();
            }
        }
        if self.fold {
            if let Some(id) = self.simplify(&kind, &args, width) {
                return id;
            }
        }
        self.raw(kind, args, width)
    }

    fn simplify(&mut self, kind: &NodeKind, args: &[NodeId], width: u32) -> Option<NodeId> {
        if !kind.is_pure() {
            return None;
        }
        let consts: Option<Vec<Value>> = args.iter().map(|&a| self.const_of(a)).collect();
        if let Some(vs) = consts {
            let n = Node {
                kind: kind.clone(),
                args: args.to_vec(),
                width,
            };
            let v = apply_pure(&n, &vs);
            return Some(self.konst(v));
        }
        match kind {
            NodeKind::Select => {
                if let Some(c) = self.const_of(args[0]) {
                    return Some(if c.is_true() { args[1] } else { args[2] });
                }
                if args[1] == args[2] {
                    return Some(args[1]);
                }
                None
            }
            NodeKind::Builtin(op) if op.arity() == 2 => {
                let (a, b) = (args[0], args[1]);
                let ones = mask(width);
                // commutative operands are sorted; a constant may sit on either side
                let (x, c) = match (self.const_of(a), self.const_of(b)) {
                    (None, Some(c)) => (a, c.bits()),
                    (Some(c), None) if op.is_commutative() => (b, c.bits()),
                    _ => return None,
                };
                match op {
                    Op::Add | Op::Or | Op::Xor | Op::Sub | Op::Shl | Op::Lshr | Op::Ashr if c == 0 => {
                        Some(x)
                    }
                    Op::And if c == ones => Some(x),
                    Op::And if c == 0 => Some(self.konst(Value::zero(width))),
                    Op::Or if c == ones => Some(self.konst(Value::new(ones, width))),
                    Op::Mul if c == 1 => Some(x),
                    _ => None,
                }
            }
            NodeKind::Builtin(Op::Not) => {
                let inner = &self.nodes[args[0]];
                if inner.kind == NodeKind::Builtin(Op::Not) {
                    return Some(inner.args[0]);
                }
                None
            }
            _ => None,
        }
    }

    fn truth(&mut self) -> NodeId {
        self.konst(Value::bool(true))
    }

    fn and(&mut self, a: Option<NodeId>, b: NodeId) -> NodeId {
        match a {
            None => b,
            Some(a) => self.add(NodeKind::Builtin(Op::And), vec![a, b], 1),
        }
    }

    fn not(&mut self, a: NodeId) -> NodeId {
        self.add(NodeKind::Builtin(Op::Not), vec![a], 1)
    }
}

/// A side effect collected during lowering, before it becomes a node.
#[derive(Clone, Debug)]
struct Eff {
    kind: NodeKind,
    target: Option<NodeId>,
    value: NodeId,
    guard: Option<NodeId>,
}

struct Lower<'a> {
    model: &'a SpecModel,
    store: Store,
    env: HashMap<u32, NodeId>,
}

impl Lower<'_> {
    fn expr(&mut self, e: &TExpr) -> NodeId {
        let w = e.ty.width().unwrap_or(0);
        match &e.kind {
            TExprKind::Const(v) => self.store.konst(Value::new(v.bits(), w)),
            TExprKind::Field(i) => self.store.add(NodeKind::Field(*i), vec![], w),
            TExprKind::Access(i) => self.store.add(NodeKind::Access(*i), vec![], w),
            TExprKind::Var(s) => self.env[s],
            TExprKind::ReadPc => self.store.add(NodeKind::ReadPc, vec![], w),
            TExprKind::ReadReg(r) => self.store.add(NodeKind::ReadReg(*r), vec![], w),
            TExprKind::ReadFile(f, i) => {
                let i = self.expr(i);
                self.store.add(NodeKind::ReadFile(*f), vec![i], w)
            }
            TExprKind::ReadMem { mem, units, addr } => {
                let a = self.expr(addr);
                self.store.add(
                    NodeKind::ReadMem {
                        mem: *mem,
                        units: *units,
                    },
                    vec![a],
                    w,
                )
            }
            TExprKind::Prim(op, xs) => {
                let args = xs.iter().map(|x| self.expr(x)).collect();
                self.store.add(NodeKind::Builtin(*op), args, w)
            }
            TExprKind::Cast(k, x) => {
                let a = self.expr(x);
                self.store.add(NodeKind::Cast(*k), vec![a], w)
            }
            TExprKind::Slice(x, h, l) => {
                let a = self.expr(x);
                self.store.add(NodeKind::Slice(*h, *l), vec![a], w)
            }
            TExprKind::Concat(xs) => {
                let args = xs.iter().map(|x| self.expr(x)).collect();
                self.store.add(NodeKind::Concat, args, w)
            }
            TExprKind::If(c, a, b) => {
                let c = self.expr(c);
                let a = self.expr(a);
                let b = self.expr(b);
                self.store.add(NodeKind::Select, vec![c, a, b], w)
            }
            TExprKind::Match(s, arms, d) => {
                let s = self.expr(s);
                let mut acc = self.expr(d);
                for (pats, body) in arms.iter().rev() {
                    let c = self.pattern_cond(s, pats);
                    let b = self.expr(body);
                    acc = self.store.add(NodeKind::Select, vec![c, b, acc], w);
                }
                acc
            }
            TExprKind::Let(slot, v, b) => {
                let v = self.expr(v);
                let prev = self.env.insert(*slot, v);
                let r = self.expr(b);
                match prev {
                    Some(p) => self.env.insert(*slot, p),
                    None => self.env.remove(slot),
                };
                r
            }
        }
    }

    fn pattern_cond(&mut self, s: NodeId, pats: &[Value]) -> NodeId {
        let sw = self.store.nodes[s].width;
        let mut acc: Option<NodeId> = None;
        for p in pats {
            let k = self.store.konst(Value::new(p.bits(), sw));
            let eq = self.store.add(NodeKind::Builtin(Op::Eq), vec![s, k], 1);
            acc = Some(match acc {
                None => eq,
                Some(a) => self.store.add(NodeKind::Builtin(Op::Or), vec![a, eq], 1),
            });
        }
        acc.unwrap_or_else(|| self.store.konst(Value::bool(false)))
    }

    fn stmt(&mut self, s: &TStmt) -> Vec<Eff> {
        match &s.kind {
            TStmtKind::WritePc(v) => vec![Eff {
                kind: NodeKind::WritePc,
                target: None,
                value: self.expr(v),
                guard: None,
            }],
            TStmtKind::WriteReg(r, v) => vec![Eff {
                kind: NodeKind::WriteReg(*r),
                target: None,
                value: self.expr(v),
                guard: None,
            }],
            TStmtKind::WriteFile(f, i, v) => {
                let target = Some(self.expr(i));
                vec![Eff {
                    kind: NodeKind::WriteFile(*f),
                    target,
                    value: self.expr(v),
                    guard: None,
                }]
            }
            TStmtKind::WriteMem {
                mem,
                units,
                addr,
                value,
            } => {
                let target = Some(self.expr(addr));
                vec![Eff {
                    kind: NodeKind::WriteMem {
                        mem: *mem,
                        units: *units,
                    },
                    target,
                    value: self.expr(value),
                    guard: None,
                }]
            }
            TStmtKind::Let(slot, v, b) => {
                let v = self.expr(v);
                let prev = self.env.insert(*slot, v);
                let r = self.stmt(b);
                match prev {
                    Some(p) => self.env.insert(*slot, p),
                    None => self.env.remove(slot),
                };
                r
            }
            TStmtKind::If(c, a, b) => {
                let c = self.expr(c);
                let ea = self.stmt(a);
                let eb = b.as_ref().map(|b| self.stmt(b)).unwrap_or_default();
                self.branch(c, ea, eb)
            }
            TStmtKind::Match(x, arms, d) => {
                let x = self.expr(x);
                let mut acc = d.as_ref().map(|d| self.stmt(d)).unwrap_or_default();
                for (pats, body) in arms.iter().rev() {
                    let c = self.pattern_cond(x, pats);
                    let e = self.stmt(body);
                    acc = self.branch(c, e, acc);
                }
                acc
            }
            TStmtKind::Block(ss) => ss.iter().flat_map(|x| self.stmt(x)).collect(),
        }
    }

    /// Joins the effects of the two arms of a conditional. Writes to the same
    /// location in both arms become one write of a selected value.
    fn branch(&mut self, c: NodeId, then: Vec<Eff>, other: Vec<Eff>) -> Vec<Eff> {
        let mut out = Vec::new();
        let mut rest: Vec<Option<Eff>> = other.into_iter().map(Some).collect();
        let nc = self.store.not(c);
        for a in then {
            let partner = rest.iter().position(|b| {
                b.as_ref()
                    .map(|b| b.kind == a.kind && b.target == a.target)
                    .unwrap_or(false)
            });
            match partner {
                Some(j) => {
                    let b = rest[j].take().unwrap();
                    let w = self.store.nodes[a.value].width;
                    let value = self.store.add(NodeKind::Select, vec![c, a.value, b.value], w);
                    let guard = match (a.guard, b.guard) {
                        (None, None) => None,
                        (ga, gb) => {
                            let t = self.store.truth();
                            let ga = ga.unwrap_or(t);
                            let gb = gb.unwrap_or(t);
                            Some(self.store.add(NodeKind::Select, vec![c, ga, gb], 1))
                        }
                    };
                    out.push(Eff { value, guard, ..a });
                }
                None => {
                    let guard = Some(self.store.and(a.guard, c));
                    out.push(Eff { guard, ..a });
                }
            }
        }
        for b in rest.into_iter().flatten() {
            let guard = Some(self.store.and(b.guard, nc));
            out.push(Eff { guard, ..b });
        }
        out
    }
}

/// Builds the behavior graph of instruction `instr`. Reads are shared leaves;
/// conditional statements become guarded writes.
pub fn build_behavior(model: &SpecModel, instr: usize) -> BehaviorGraph {
    let mut l = Lower {
        model,
        store: Store::new(false),
        env: HashMap::new(),
    };
    let start = l.store.raw(NodeKind::Start, vec![], 0);
    let effects = l.stmt(&model.instructions[instr].behavior);
    let _ = l.model;
    let mut ids = Vec::new();
    for e in effects {
        let mut args: Vec<NodeId> = e.target.into_iter().collect();
        args.push(e.value);
        args.extend(e.guard);
        ids.push(l.store.raw(e.kind, args, 0));
    }
    let end = l.store.raw(NodeKind::End, ids, 0);
    BehaviorGraph {
        instr,
        nodes: l.store.nodes,
        start,
        end,
    }
}

/// Folds constants, simplifies selects and identities, drops writes whose
/// guard is constant false and removes nodes no side effect depends on.
pub fn canonicalize(g: &BehaviorGraph) -> BehaviorGraph {
    let mut s = Store::new(true);
    let mut map: Vec<Option<NodeId>> = vec![None; g.nodes.len()];
    fn copy(g: &BehaviorGraph, s: &mut Store, map: &mut Vec<Option<NodeId>>, id: NodeId) -> NodeId {
        if let Some(m) = map[id] {
            return m;
        }
        let n = &g.nodes[id];
        let args: Vec<NodeId> = n.args.iter().map(|&a| copy(g, s, map, a)).collect();
        let r = s.add(n.kind.clone(), args, n.width);
        map[id] = Some(r);
        r
    }
    let start = s.raw(NodeKind::Start, vec![], 0);
    let mut effects = Vec::new();
    for &e in g.effects() {
        let n = &g.nodes[e];
        let mut args: Vec<NodeId> = Vec::new();
        let mut guard = n.guard().map(|gd| copy(g, &mut s, &mut map, gd));
        if let Some(gd) = guard {
            match s.const_of(gd) {
                Some(v) if v.is_true() => guard = None,
                Some(_) => continue,
                None => {}
            }
        }
        for &a in &n.args[..n.kind.effect_arity()] {
            args.push(copy(g, &mut s, &mut map, a));
        }
        args.extend(guard);
        effects.push(s.raw(n.kind.clone(), args, 0));
    }
    let end = s.raw(NodeKind::End, effects, 0);
    // copying bottom-up from the effects leaves no dead nodes behind, except
    // intermediate results that simplification made unreachable
    compact(BehaviorGraph {
        instr: g.instr,
        nodes: s.nodes,
        start,
        end,
    })
}

/// Removes nodes unreachable from `End` (other than `Start`) and renumbers.
fn compact(g: BehaviorGraph) -> BehaviorGraph {
    let mut live = vec![false; g.nodes.len()];
    live[g.start] = true;
    live[g.end] = true;
    for i in (0..g.nodes.len()).rev() {
        if live[i] {
            for &a in &g.nodes[i].args {
                live[a] = true;
            }
        }
    }
    let mut map = vec![usize::MAX; g.nodes.len()];
    let mut nodes = Vec::new();
    for (i, n) in g.nodes.into_iter().enumerate() {
        if live[i] {
            map[i] = nodes.len();
            nodes.push(Node {
                args: n.args.iter().map(|&a| map[a]).collect(),
                ..n
            });
        }
    }
    BehaviorGraph {
        instr: g.instr,
        start: map[g.start],
        end: map[g.end],
        nodes,
    }
}

/// Canonical graphs of every instruction, in specification order.
pub fn build_all(model: &SpecModel) -> Vec<BehaviorGraph> {
    (0..model.instructions.len())
        .map(|i| canonicalize(&build_behavior(model, i)))
        .collect()
}
