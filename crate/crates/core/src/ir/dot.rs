//! Graphviz and plain-text export.

use std::fmt::Write;

use super::graph::*;
use crate::frontend::model::SpecModel;

/// Human-readable node label using the specification's names.
pub fn label(model: &SpecModel, g: &BehaviorGraph, id: NodeId) -> String {
    let n = &g.nodes[id];
    let fmt = model.format_of(g.instr);
    match &n.kind {
        NodeKind::Field(i) => format!("field {}", fmt.fields[*i].name),
        NodeKind::Access(i) => format!("access {}", fmt.access[*i].name),
        NodeKind::Const(v) => format!("const {:#x}:{}", v.bits(), v.width()),
        NodeKind::ReadPc => format!("read<{}>", model.resource_name(crate::frontend::model::Resource::Pc)),
        NodeKind::ReadReg(_) | NodeKind::ReadFile(_) | NodeKind::ReadMem { .. } => {
            format!("read<{}>", model.resource_name(n.kind.resource().unwrap()))
        }
        k if k.is_effect() => format!("write<{}>", model.resource_name(k.resource().unwrap())),
        k => k.to_string(),
    }
}

/// DOT text: data edges point from argument to user; dashed edges form the
/// control chain from start through each side effect to end.
pub fn export_dot(model: &SpecModel, g: &BehaviorGraph) -> String {
    let mut out = String::new();
    let name = &model.instructions[g.instr].name;
    writeln!(out, "digraph \"{name}\" {{").unwrap();
    writeln!(out, "  node [shape=box, fontname=monospace];").unwrap();
    for id in 0..g.nodes.len() {
        let l = label(model, g, id).replace('"', "\\\"");
        writeln!(out, "  n{id} [label=\"{l}\"];").unwrap();
    }
    for (id, n) in g.nodes.iter().enumerate() {
        if n.kind == NodeKind::End {
            continue;
        }
        for (k, &a) in n.args.iter().enumerate() {
            let style = if n.guard().is_some() && k + 1 == n.args.len() {
                " [label=\"guard\"]"
            } else {
                ""
            };
            writeln!(out, "  n{a} -> n{id}{style};").unwrap();
        }
    }
    let mut prev = g.start;
    for &e in g.effects() {
        writeln!(out, "  n{prev} -> n{e} [style=dashed];").unwrap();
        prev = e;
    }
    writeln!(out, "  n{prev} -> n{} [style=dashed];", g.end).unwrap();
    out.push_str("}\n");
    out
}

/// One line per node: `nID:WIDTH = label args`, then the effect order.
pub fn export_text(model: &SpecModel, g: &BehaviorGraph) -> String {
    let mut out = String::new();
    writeln!(out, "{}:", model.instructions[g.instr].name).unwrap();
    for (id, n) in g.nodes.iter().enumerate() {
        if matches!(n.kind, NodeKind::Start | NodeKind::End) {
            continue;
        }
        let args: Vec<String> = n.args.iter().map(|a| format!("n{a}")).collect();
        let w = if n.width > 0 { format!(":{}", n.width) } else { String::new() };
        write!(out, "  n{id}{w} = {}", label(model, g, id)).unwrap();
        if !args.is_empty() {
            write!(out, " {}", args.join(", ")).unwrap();
        }
        out.push('\n');
    }
    let effects: Vec<String> = g.effects().iter().map(|e| format!("n{e}")).collect();
    writeln!(out, "  effects: {}", effects.join(" -> ")).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::rv32i;
    use crate::ir::build_all;

    #[test]
    fn add_dot_has_one_write() {
        let m = rv32i();
        let gs = build_all(&m);
        let g = &gs[m.instruction("ADD").unwrap()];
        let dot = export_dot(&m, g);
        assert_eq!(dot.matches("label=\"write<").count(), 1);
        assert_eq!(dot.matches("label=\"read<X>\"").count(), 2);
        assert_eq!(dot, export_dot(&m, g));
        assert!(dot.starts_with("digraph \"ADD\" {"));
    }

    #[test]
    fn text_lists_effects_in_order() {
        let m = rv32i();
        let gs = build_all(&m);
        let t = export_text(&m, &gs[m.instruction("JAL").unwrap()]);
        assert!(t.starts_with("JAL:\n"));
        let last = t.lines().last().unwrap();
        assert!(last.starts_with("  effects: "));
        assert_eq!(last.split(" -> ").count(), 2, "{t}");
    }
}
