//! Instruction-selection tree patterns extracted from behavior graphs.

use std::fmt;

use crate::frontend::model::{CastKind, SpecModel};
use crate::ir::{BehaviorGraph, NodeId, NodeKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    /// Register read indexed by a format field: `X:$rs1`.
    Reg { file: String, field: String },
    /// Field or access function used as a value: `imm:$immS`.
    Imm(String),
    Const(u128),
    Pc,
    /// Single architectural register.
    Named(String),
    Op { op: String, args: Vec<Tree> },
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Reg { file, field } => write!(f, "{file}:${field}"),
            Tree::Imm(n) => write!(f, "imm:${n}"),
            Tree::Const(v) if *v >= 10 => write!(f, "imm {v:#x}"),
            Tree::Const(v) => write!(f, "imm {v}"),
            Tree::Pc => write!(f, "pc"),
            Tree::Named(n) => write!(f, "{n}"),
            Tree::Op { op, args } => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelPattern {
    pub instr: usize,
    pub tree: Tree,
}

impl fmt::Display for SelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.tree.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct NotATree(pub String);

struct Extract<'a> {
    model: &'a SpecModel,
    g: &'a BehaviorGraph,
    seen: Vec<bool>,
}

impl Extract<'_> {
    fn field_name(&self, n: NodeId) -> Option<String> {
        let fmt = self.model.format_of(self.g.instr);
        match self.g.nodes[n].kind {
            NodeKind::Field(i) => Some(fmt.fields[i].name.clone()),
            _ => None,
        }
    }

    fn index_field(&self, n: NodeId) -> Result<String, NotATree> {
        self.field_name(n)
            .ok_or_else(|| NotATree(format!("register index is not a format field ({})", crate::ir::dot::label(self.model, self.g, n))))
    }

    fn tree(&mut self, n: NodeId) -> Result<Tree, NotATree> {
        let node = &self.g.nodes[n];
        let fmt = self.model.format_of(self.g.instr);
        let shareable = matches!(
            node.kind,
            NodeKind::Field(_) | NodeKind::Access(_) | NodeKind::Const(_) | NodeKind::ReadPc | NodeKind::ReadReg(_)
        ) || matches!(node.kind, NodeKind::ReadFile(_) if self.field_name(node.args[0]).is_some());
        if !shareable {
            if self.seen[n] {
                return Err(NotATree(format!("shared node {}", crate::ir::dot::label(self.model, self.g, n))));
            }
            self.seen[n] = true;
        }
        let sub = |this: &mut Self| -> Result<Vec<Tree>, NotATree> {
            node.args.iter().map(|&a| this.tree(a)).collect()
        };
        Ok(match &node.kind {
            NodeKind::Field(i) => Tree::Imm(fmt.fields[*i].name.clone()),
            NodeKind::Access(i) => Tree::Imm(fmt.access[*i].name.clone()),
            NodeKind::Const(v) => Tree::Const(v.bits()),
            NodeKind::ReadPc => Tree::Pc,
            NodeKind::ReadReg(r) => Tree::Named(self.model.registers[*r].name.clone()),
            NodeKind::ReadFile(f) => Tree::Reg {
                file: self.model.files[*f].name.clone(),
                field: self.index_field(node.args[0])?,
            },
            NodeKind::ReadMem { units, .. } => Tree::Op { op: format!("load<{units}>"), args: sub(self)? },
            NodeKind::Builtin(op) => Tree::Op { op: op.name().to_string(), args: sub(self)? },
            NodeKind::Cast(k) => {
                let name = match k {
                    CastKind::Trunc => "trunc",
                    CastKind::ZExt => "zext",
                    CastKind::SExt => "sext",
                };
                Tree::Op { op: format!("{name}<{}>", node.width), args: sub(self)? }
            }
            NodeKind::Slice(h, l) => Tree::Op { op: format!("slice<{h},{l}>"), args: sub(self)? },
            NodeKind::Concat => Tree::Op { op: "concat".into(), args: sub(self)? },
            NodeKind::Select => Tree::Op { op: "select".into(), args: sub(self)? },
            k => return Err(NotATree(format!("unexpected node {k}"))),
        })
    }
}

/// Tree pattern of one canonical graph.
pub fn extract_pattern(model: &SpecModel, g: &BehaviorGraph) -> Result<SelPattern, NotATree> {
    let effects = g.effects();
    let e = match effects {
        [] => return Err(NotATree("no side effect".into())),
        [e] => *e,
        _ => {
            let names: Vec<String> = effects.iter().map(|&e| crate::ir::dot::label(model, g, e)).collect();
            return Err(NotATree(format!("multiple side effects: {}", names.join(", "))));
        }
    };
    let node = &g.nodes[e];
    let mut x = Extract { model, g, seen: vec![false; g.nodes.len()] };
    if node.guard().is_some() && node.kind != NodeKind::WritePc {
        return Err(NotATree(format!("conditional {}", crate::ir::dot::label(model, g, e))));
    }
    let tree = match node.kind {
        NodeKind::WriteFile(f) => {
            let dst = Tree::Reg {
                file: model.files[f].name.clone(),
                field: x.index_field(node.args[0])?,
            };
            Tree::Op { op: "set".into(), args: vec![dst, x.tree(node.args[1])?] }
        }
        NodeKind::WriteReg(r) => Tree::Op {
            op: "set".into(),
            args: vec![Tree::Named(model.registers[r].name.clone()), x.tree(node.args[0])?],
        },
        NodeKind::WriteMem { units, .. } => {
            let v = x.tree(node.args[1])?;
            let a = x.tree(node.args[0])?;
            Tree::Op { op: format!("store<{units}>"), args: vec![v, a] }
        }
        NodeKind::WritePc => match node.guard() {
            Some(c) => {
                let c = x.tree(c)?;
                let t = x.tree(node.args[0])?;
                Tree::Op { op: "brcond".into(), args: vec![c, t] }
            }
            None => Tree::Op { op: "br".into(), args: vec![x.tree(node.args[0])?] },
        },
        _ => return Err(NotATree("unexpected side effect".into())),
    };
    Ok(SelPattern { instr: g.instr, tree })
}

/// One line per instruction in definition order.
pub fn emit_patterns(model: &SpecModel, graphs: &[BehaviorGraph]) -> String {
    let mut out = String::new();
    for g in graphs {
        let name = &model.instructions[g.instr].name;
        match extract_pattern(model, g) {
            Ok(p) => out.push_str(&format!("{name}: {p}\n")),
            Err(e) => out.push_str(&format!("{name}: NOT-A-TREE {e}\n")),
        }
    }
    out
}
