use std::fmt;

use crate::frontend::model::{CastKind, Op, Resource};
use crate::value::Value;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Start,
    End,
    /// Statement-level branching. Construction lowers conditionals to guards
    /// and selects, so built graphs never contain these two.
    IfSplit,
    Merge,
    Const(Value),
    /// Format field, by index in the instruction's format.
    Field(usize),
    /// Access function, by index in the instruction's format.
    Access(usize),
    ReadPc,
    ReadReg(usize),
    /// args: index
    ReadFile(usize),
    /// args: address
    ReadMem { mem: usize, units: u32 },
    Builtin(Op),
    Cast(CastKind),
    Slice(u32, u32),
    Concat,
    /// args: condition, then, else
    Select,
    /// args: value [, guard]
    WritePc,
    /// args: value [, guard]
    WriteReg(usize),
    /// args: index, value [, guard]
    WriteFile(usize),
    /// args: address, value [, guard]
    WriteMem { mem: usize, units: u32 },
}

impl NodeKind {
    pub fn is_effect(&self) -> bool {
        matches!(
            self,
            NodeKind::WritePc | NodeKind::WriteReg(_) | NodeKind::WriteFile(_) | NodeKind::WriteMem { .. }
        )
    }

    pub fn is_read(&self) -> bool {
        matches!(
            self,
            NodeKind::ReadPc | NodeKind::ReadReg(_) | NodeKind::ReadFile(_) | NodeKind::ReadMem { .. }
        )
    }

    pub fn is_leaf(&self) -> bool {
        matches!(
            self,
            NodeKind::Const(_) | NodeKind::Field(_) | NodeKind::Access(_) | NodeKind::ReadPc | NodeKind::ReadReg(_)
        )
    }

    /// Computations without side effects or state access.
    pub fn is_pure(&self) -> bool {
        matches!(
            self,
            NodeKind::Builtin(_) | NodeKind::Cast(_) | NodeKind::Slice(..) | NodeKind::Concat | NodeKind::Select
        )
    }

    /// Resource touched by a read or write node.
    pub fn resource(&self) -> Option<Resource> {
        Some(match self {
            NodeKind::ReadPc | NodeKind::WritePc => Resource::Pc,
            NodeKind::ReadReg(r) | NodeKind::WriteReg(r) => Resource::Reg(*r),
            NodeKind::ReadFile(f) | NodeKind::WriteFile(f) => Resource::File(*f),
            NodeKind::ReadMem { mem, .. } | NodeKind::WriteMem { mem, .. } => Resource::Mem(*mem),
            _ => return None,
        })
    }

    /// Number of leading arguments that are not the guard.
    pub fn effect_arity(&self) -> usize {
        match self {
            NodeKind::WritePc | NodeKind::WriteReg(_) => 1,
            NodeKind::WriteFile(_) | NodeKind::WriteMem { .. } => 2,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub kind: NodeKind,
    pub args: Vec<NodeId>,
    /// Result width; 0 for nodes without a value.
    pub width: u32,
}

impl Node {
    /// Guard of a side effect, `None` when unconditional.
    pub fn guard(&self) -> Option<NodeId> {
        if self.kind.is_effect() && self.args.len() > self.kind.effect_arity() {
            self.args.last().copied()
        } else {
            None
        }
    }

    /// Index or address argument of a write.
    pub fn target(&self) -> Option<NodeId> {
        match self.kind {
            NodeKind::WriteFile(_) | NodeKind::WriteMem { .. } => Some(self.args[0]),
            _ => None,
        }
    }

    /// Value argument of a write.
    pub fn value(&self) -> Option<NodeId> {
        match self.kind {
            NodeKind::WritePc | NodeKind::WriteReg(_) => Some(self.args[0]),
            NodeKind::WriteFile(_) | NodeKind::WriteMem { .. } => Some(self.args[1]),
            _ => None,
        }
    }
}

/// SSA behavior of one instruction. Nodes are stored in a topological order:
/// every argument precedes its user. `End` depends on every side effect, in
/// statement order, which is also the control chain `Start -> ... -> End`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BehaviorGraph {
    pub instr: usize,
    pub nodes: Vec<Node>,
    pub start: NodeId,
    pub end: NodeId,
}

impl BehaviorGraph {
    pub fn effects(&self) -> &[NodeId] {
        &self.nodes[self.end].args
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Users of every node.
    pub fn users(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &a in &n.args {
                if !out[a].contains(&i) {
                    out[a].push(i);
                }
            }
        }
        out
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Start => write!(f, "start"),
            NodeKind::End => write!(f, "end"),
            NodeKind::IfSplit => write!(f, "if"),
            NodeKind::Merge => write!(f, "merge"),
            NodeKind::Const(v) => write!(f, "const {:#x}", v.bits()),
            NodeKind::Field(i) => write!(f, "field #{i}"),
            NodeKind::Access(i) => write!(f, "access #{i}"),
            NodeKind::ReadPc => write!(f, "read<PC>"),
            NodeKind::ReadReg(r) => write!(f, "read<R{r}>"),
            NodeKind::ReadFile(r) => write!(f, "read<F{r}>"),
            NodeKind::ReadMem { mem, units } => write!(f, "read<M{mem},{units}>"),
            NodeKind::Builtin(op) => write!(f, "{}", op.name()),
            NodeKind::Cast(k) => write!(f, "{}", k.name()),
            NodeKind::Slice(h, l) => write!(f, "slice {h}..{l}"),
            NodeKind::Concat => write!(f, "concat"),
            NodeKind::Select => write!(f, "select"),
            NodeKind::WritePc => write!(f, "write<PC>"),
            NodeKind::WriteReg(r) => write!(f, "write<R{r}>"),
            NodeKind::WriteFile(r) => write!(f, "write<F{r}>"),
            NodeKind::WriteMem { mem, units } => write!(f, "write<M{mem},{units}>"),
        }
    }
}
