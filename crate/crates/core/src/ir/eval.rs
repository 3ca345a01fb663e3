//! Evaluation of behavior graphs against a machine state.

use super::graph::*;
use crate::value::Value;

/// Values of the leaves of a behavior graph.
pub trait Inputs {
    fn field(&mut self, i: usize) -> Value;
    fn access(&mut self, i: usize) -> Value;
    fn pc(&mut self) -> Value;
    fn reg(&mut self, r: usize) -> Value;
    fn file(&mut self, f: usize, index: Value) -> Value;
    fn mem(&mut self, m: usize, units: u32, addr: Value) -> Value;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Pc(Value),
    Reg(usize, Value),
    File(usize, Value, Value),
    Mem {
        mem: usize,
        units: u32,
        addr: Value,
        value: Value,
    },
}

/// Result of a pure node applied to argument values.
pub fn apply_pure(n: &Node, args: &[Value]) -> Value {
    match &n.kind {
        NodeKind::Builtin(op) => op.apply(args),
        NodeKind::Cast(k) => k.apply(args[0], n.width),
        NodeKind::Slice(h, l) => args[0].slice(*h, *l),
        NodeKind::Concat => {
            let mut acc = args[0];
            for a in &args[1..] {
                acc = acc.concat(*a);
            }
            acc
        }
        NodeKind::Select => {
            if args[0].is_true() {
                args[1]
            } else {
                args[2]
            }
        }
        other => panic!("{other} is not a pure node"),
    }
}

/// Value of node `id` given the values of its arguments. Reads go to `inp`.
pub fn eval_node(n: &Node, args: &[Value], inp: &mut dyn Inputs) -> Option<Value> {
    Some(match &n.kind {
        NodeKind::Const(v) => *v,
        NodeKind::Field(i) => inp.field(*i),
        NodeKind::Access(i) => inp.access(*i),
        NodeKind::ReadPc => inp.pc(),
        NodeKind::ReadReg(r) => inp.reg(*r),
        NodeKind::ReadFile(f) => inp.file(*f, args[0]),
        NodeKind::ReadMem { mem, units } => inp.mem(*mem, *units, args[0]),
        k if k.is_pure() => apply_pure(n, args),
        _ => return None,
    })
}

/// Side effect of a write node, if its guard holds.
pub fn effect_of(n: &Node, args: &[Value]) -> Option<Effect> {
    let arity = n.kind.effect_arity();
    if args.len() > arity && !args[arity].is_true() {
        return None;
    }
    Some(match n.kind {
        NodeKind::WritePc => Effect::Pc(args[0]),
        NodeKind::WriteReg(r) => Effect::Reg(r, args[0]),
        NodeKind::WriteFile(f) => Effect::File(f, args[0], args[1]),
        NodeKind::WriteMem { mem, units } => Effect::Mem {
            mem,
            units,
            addr: args[0],
            value: args[1],
        },
        _ => return None,
    })
}

/// Reads everything first, then reports the guarded writes in graph order.
pub fn evaluate(g: &BehaviorGraph, inp: &mut dyn Inputs) -> Vec<Effect> {
    let mut vals: Vec<Option<Value>> = vec![None; g.nodes.len()];
    let mut effects = Vec::new();
    let mut args = Vec::new();
    for (i, n) in g.nodes.iter().enumerate() {
        args.clear();
        args.extend(n.args.iter().map(|&a| vals[a].unwrap_or(Value::zero(1))));
        if n.kind.is_effect() {
            effects.extend(effect_of(n, &args));
        } else {
            vals[i] = eval_node(n, &args, inp);
        }
    }
    effects
}
