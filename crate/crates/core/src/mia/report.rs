use std::collections::BTreeMap;
use std::fmt::Write;

use super::resolve::PipelineModel;
use crate::frontend::model::SpecModel;
use crate::ir::{dot::label, BehaviorGraph};

/// Text description of a resolved pipeline: per-stage operations, pipeline
/// registers, ports and control rules.
pub fn report(model: &SpecModel, graphs: &[BehaviorGraph], pm: &PipelineModel) -> String {
    let mut out = String::new();
    let k = pm.depth();
    writeln!(out, "pipeline {} ({k} stages)", pm.name).unwrap();
    for s in 0..k {
        let mut tags = Vec::new();
        if s == pm.fetch_stage {
            tags.push("fetch");
        }
        if s == pm.decode_stage {
            tags.push("decode");
        }
        if Some(s) == pm.verify_stage {
            tags.push("verify");
        }
        if s == pm.check_stage {
            tags.push("unknown-check");
        }
        let tag = if tags.is_empty() {
            String::new()
        } else {
            format!(" [{}]", tags.join(", "))
        };
        writeln!(out, "stage {}{tag}", pm.stages[s]).unwrap();
        let mut ops: BTreeMap<String, usize> = BTreeMap::new();
        for (g, plan) in graphs.iter().zip(&pm.plans) {
            for &n in &plan.by_stage[s] {
                *ops.entry(label(model, g, n)).or_default() += 1;
            }
        }
        for (l, c) in ops {
            writeln!(out, "  op {l} x{c}").unwrap();
        }
        if s + 1 < k {
            let regs = &pm.registers[s];
            let bits: u32 = regs.iter().map(|r| r.width).sum();
            writeln!(out, "  registers out: {} ({bits} bits)", regs.len()).unwrap();
            for r in regs {
                match r.label {
                    Some(l) => writeln!(out, "    {} bits: {l}", r.width).unwrap(),
                    None => writeln!(out, "    {} bits: {} value(s)", r.width, r.nodes.len()).unwrap(),
                }
            }
        }
    }
    writeln!(out, "ports").unwrap();
    let fetch_port = if pm.unified_memory { "shared with data reads" } else { "separate" };
    writeln!(out, "  fetch: {fetch_port}").unwrap();
    for (r, p) in &pm.ports {
        let name = model.resource_name(*r);
        let per = |v: &[usize]| {
            v.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(s, c)| format!("{}={c}", pm.stages[s]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            out,
            "  {name}: {} read ({}), {} write ({})",
            p.read_count(),
            per(&p.reads),
            p.write_count(),
            per(&p.writes)
        )
        .unwrap();
    }
    writeln!(out, "control").unwrap();
    for h in &pm.hazards {
        let st = |v: &[usize]| v.iter().map(|&s| pm.stages[s].as_str()).collect::<Vec<_>>().join(" ");
        write!(
            out,
            "  hazard {} read in {}: stall while a writer is in {}",
            model.resource_name(h.res),
            pm.stages[h.consumer],
            st(&h.producers)
        )
        .unwrap();
        if !h.forward_from.is_empty() {
            write!(out, "; forward from {}", st(&h.forward_from)).unwrap();
        }
        writeln!(out).unwrap();
    }
    match pm.plans.iter().filter_map(|p| p.redirect).max() {
        Some(v) => {
            let flushed: Vec<&str> = pm.stages[..v].iter().map(String::as_str).collect();
            writeln!(
                out,
                "  branch: predict not taken, resolve in {}, flush {}",
                pm.stages[v],
                if flushed.is_empty() { "nothing".into() } else { flushed.join(" ") }
            )
            .unwrap();
        }
        None => writeln!(out, "  branch: none").unwrap(),
    }
    for w in &pm.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    out
}
