//! Placement of instruction semantics onto pipeline stages.

use std::collections::{BTreeMap, HashMap};

use super::ipg::{build_ipg, InstrSet, Ipg};
use crate::frontend::model::{MapOp, MiaSpec, Resource, SpecModel};
use crate::ir::{BehaviorGraph, NodeKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MiaError {
    #[error("no micro architecture named `{0}`")]
    UnknownMia(String),
    #[error("micro architecture `{mia}`: {message}")]
    Structure { mia: String, message: String },
    #[error("{} instruction(s) have semantics no stage realizes:\n{}", .0.len(), residual_lines(.0))]
    ResidualSemantics(Vec<(String, Vec<String>)>),
    #[error("memory `{resource}` has one {kind} port but the pipeline needs {count}")]
    PortConflict { resource: String, kind: &'static str, count: usize },
}

fn residual_lines(r: &[(String, Vec<String>)]) -> String {
    r.iter()
        .map(|(i, ns)| format!("  {i}: {}", ns.join(", ")))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadSite {
    pub node: usize,
    pub res: Resource,
    pub stage: usize,
    pub forward: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteSite {
    pub node: usize,
    pub res: Resource,
    pub stage: usize,
    /// Stage by whose end the written value and index are known.
    pub ready: usize,
}

/// Where one instruction's nodes execute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrPlan {
    pub stage_of: Vec<Option<usize>>,
    /// Per stage, the nodes executed there in dependency order.
    pub by_stage: Vec<Vec<usize>>,
    pub reads: Vec<ReadSite>,
    pub writes: Vec<WriteSite>,
    pub pc_write: Option<usize>,
    /// Stage at which the next PC is known and checked.
    pub redirect: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ports {
    pub reads: Vec<usize>,
    pub writes: Vec<usize>,
}

impl Ports {
    pub fn read_count(&self) -> usize {
        self.reads.iter().sum()
    }
    pub fn write_count(&self) -> usize {
        self.writes.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipeReg {
    pub width: u32,
    /// IPG nodes sharing the register, with the instructions using each.
    pub nodes: Vec<(usize, InstrSet)>,
    pub label: Option<&'static str>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HazardRule {
    pub res: Resource,
    pub consumer: usize,
    pub producers: Vec<usize>,
    /// Producer stages served by a bypass instead of a stall.
    pub forward_from: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PipelineModel {
    pub name: String,
    pub stages: Vec<String>,
    pub fetch_stage: usize,
    pub decode_stage: usize,
    pub check_stage: usize,
    pub verify_stage: Option<usize>,
    pub plans: Vec<InstrPlan>,
    pub ipg: Ipg,
    pub ports: BTreeMap<Resource, Ports>,
    pub unified_memory: bool,
    /// Registers at the boundary after each stage but the last.
    pub registers: Vec<Vec<PipeReg>>,
    pub hazards: Vec<HazardRule>,
    pub warnings: Vec<String>,
}

impl PipelineModel {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn register_count(&self) -> usize {
        self.registers.iter().map(Vec::len).sum()
    }

    pub fn ports_of(&self, r: Resource) -> Ports {
        self.ports.get(&r).cloned().unwrap_or_default()
    }
}

struct Placer<'a> {
    graphs: &'a [BehaviorGraph],
    place: Vec<Vec<Option<usize>>>,
    forward: Vec<Vec<bool>>,
}

impl Placer<'_> {
    fn computable(&self, i: usize, n: usize, snap: &[Option<usize>]) -> bool {
        if snap[n].is_some() {
            return true;
        }
        let node = &self.graphs[i].nodes[n];
        node.kind.is_pure() && node.args.iter().all(|&a| self.computable(i, a, snap))
    }

    fn place_closure(&mut self, i: usize, n: usize, s: usize) {
        if self.place[i][n].is_some() {
            return;
        }
        for a in self.graphs[i].nodes[n].args.clone() {
            self.place_closure(i, a, s);
        }
        self.place[i][n] = Some(s);
    }

    fn args_ready(&self, i: usize, n: usize, snap: &[Option<usize>]) -> bool {
        self.graphs[i].nodes[n].args.iter().all(|&a| self.computable(i, a, snap))
    }
}

fn is_leaf(k: &NodeKind) -> bool {
    matches!(k, NodeKind::Field(_) | NodeKind::Access(_) | NodeKind::Const(_) | NodeKind::ReadPc)
}

fn describe(model: &SpecModel, k: &NodeKind) -> String {
    let r = |r: Resource| model.resource_name(r).to_string();
    match k {
        NodeKind::WritePc => format!("write {}", r(Resource::Pc)),
        NodeKind::WriteReg(x) => format!("write {}", r(Resource::Reg(*x))),
        NodeKind::WriteFile(f) => format!("write {}", r(Resource::File(*f))),
        NodeKind::WriteMem { mem, units } => format!("write {}<{units}>", r(Resource::Mem(*mem))),
        other => other.to_string(),
    }
}

/// Resolves micro architecture `mia` against the canonical graphs of every
/// instruction.
pub fn resolve(model: &SpecModel, mia: &MiaSpec, graphs: &[BehaviorGraph]) -> Result<PipelineModel, MiaError> {
    let structure = |message: String| MiaError::Structure {
        mia: mia.name.clone(),
        message,
    };
    let k = mia.stages.len();
    if k == 0 {
        return Err(structure("has no stages".into()));
    }
    let fetches: Vec<usize> = (0..k).filter(|&s| mia.stages[s].fetch).collect();
    let decodes: Vec<usize> = (0..k).filter(|&s| mia.stages[s].decode).collect();
    if fetches.len() != 1 {
        return Err(structure(format!("needs exactly one fetchNext, found {}", fetches.len())));
    }
    if decodes.len() != 1 {
        return Err(structure(format!("needs exactly one decode, found {}", decodes.len())));
    }
    let (fetch, decode) = (fetches[0], decodes[0]);
    if decode < fetch {
        return Err(structure("decodes before it fetches".into()));
    }

    let mut p = Placer {
        graphs,
        place: graphs.iter().map(|g| vec![None; g.nodes.len()]).collect(),
        forward: graphs.iter().map(|g| vec![false; g.nodes.len()]).collect(),
    };
    let mut verify = None;
    let mut check = None;
    let mut warnings = Vec::new();
    for s in 0..k {
        if s == decode {
            for (i, g) in graphs.iter().enumerate() {
                for (n, node) in g.nodes.iter().enumerate() {
                    if is_leaf(&node.kind) {
                        p.place[i][n] = Some(s);
                    }
                }
            }
        }
        for (op, _) in &mia.stages[s].ops {
            match *op {
                MapOp::UnknownCheck => check = Some(s),
                MapOp::Compute => {
                    for (i, g) in graphs.iter().enumerate() {
                        for (n, node) in g.nodes.iter().enumerate() {
                            let ready = node.args.iter().all(|&a| p.place[i][a].is_some());
                            if p.place[i][n].is_none() && node.kind.is_pure() && ready {
                                p.place[i][n] = Some(s);
                            }
                        }
                    }
                }
                MapOp::Read(r) | MapOp::ReadOrForward(r, _) => {
                    let fwd = matches!(op, MapOp::ReadOrForward(..));
                    for (i, g) in graphs.iter().enumerate() {
                        let snap = p.place[i].clone();
                        let hits: Vec<usize> = (0..g.nodes.len())
                            .filter(|&n| {
                                let k = &g.nodes[n].kind;
                                snap[n].is_none() && k.is_read() && !is_leaf(k) && k.resource() == Some(r)
                            })
                            .filter(|&n| p.args_ready(i, n, &snap))
                            .collect();
                        for n in hits {
                            p.place_closure(i, n, s);
                            p.forward[i][n] = fwd;
                        }
                    }
                }
                MapOp::Verify => {
                    verify = Some(s);
                    for (i, g) in graphs.iter().enumerate() {
                        let Some(w) = g.effects().iter().copied().find(|&e| g.nodes[e].kind == NodeKind::WritePc) else {
                            continue;
                        };
                        let snap = p.place[i].clone();
                        if p.place[i][w].is_some() {
                            continue;
                        }
                        if p.args_ready(i, w, &snap) {
                            for a in g.nodes[w].args.clone() {
                                p.place_closure(i, a, s);
                            }
                        } else {
                            warnings.push(format!(
                                "stage {}: next PC of `{}` is not ready for verify",
                                mia.stages[s].name, model.instructions[g.instr].name
                            ));
                        }
                    }
                }
                MapOp::Write(r) => {
                    for (i, g) in graphs.iter().enumerate() {
                        let snap = p.place[i].clone();
                        for &e in g.effects() {
                            let k = &g.nodes[e].kind;
                            if snap[e].is_none() && k.resource() == Some(r) && p.args_ready(i, e, &snap) {
                                p.place_closure(i, e, s);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut residual = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let left: Vec<String> = g
            .effects()
            .iter()
            .filter(|&&e| p.place[i][e].is_none())
            .map(|&e| describe(model, &g.nodes[e].kind))
            .collect();
        if !left.is_empty() {
            residual.push((model.instructions[g.instr].name.clone(), left));
        }
    }
    if !residual.is_empty() {
        return Err(MiaError::ResidualSemantics(residual));
    }

    let plans: Vec<InstrPlan> = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| plan_of(g, &p.place[i], &p.forward[i], k, verify))
        .collect();
    let ipg = build_ipg(model, graphs);
    let ports = infer_ports(model, mia, &ipg, &plans)?;
    let registers = pipeline_registers(model, &ipg, graphs, &plans, k, decode);
    let hazards = hazard_rules(&plans);
    Ok(PipelineModel {
        name: mia.name.clone(),
        stages: mia.stages.iter().map(|s| s.name.clone()).collect(),
        fetch_stage: fetch,
        decode_stage: decode,
        check_stage: check.unwrap_or(k - 1),
        verify_stage: verify,
        plans,
        ipg,
        ports,
        unified_memory: mia.unified_memory,
        registers,
        hazards,
        warnings,
    })
}

fn plan_of(g: &BehaviorGraph, place: &[Option<usize>], fwd: &[bool], k: usize, verify: Option<usize>) -> InstrPlan {
    let mut by_stage = vec![Vec::new(); k];
    for (n, s) in place.iter().enumerate() {
        if let Some(s) = s {
            by_stage[*s].push(n);
        }
    }
    let mut reads = Vec::new();
    let mut writes = Vec::new();
    let mut pc_write = None;
    for (n, node) in g.nodes.iter().enumerate() {
        let Some(stage) = place[n] else { continue };
        if node.kind.is_read() && !is_leaf(&node.kind) {
            reads.push(ReadSite {
                node: n,
                res: node.kind.resource().expect("read resource"),
                stage,
                forward: fwd[n],
            });
        }
        if node.kind.is_effect() {
            let ready = node.args.iter().filter_map(|&a| place[a]).max().unwrap_or(stage);
            writes.push(WriteSite {
                node: n,
                res: node.kind.resource().expect("write resource"),
                stage,
                ready,
            });
            if node.kind == NodeKind::WritePc {
                pc_write = Some(n);
            }
        }
    }
    let redirect = pc_write.map(|w| {
        let args = g.nodes[w].args.iter().filter_map(|&a| place[a]).max().unwrap_or(0);
        match verify {
            Some(v) => v.max(args),
            None => place[w].unwrap_or(args),
        }
    });
    InstrPlan {
        stage_of: place.to_vec(),
        by_stage,
        reads,
        writes,
        pc_write,
        redirect,
    }
}

/// Greedy coloring: accesses whose instruction sets overlap need distinct
/// ports.
fn color(items: &BTreeMap<usize, InstrSet>) -> usize {
    let mut ports: Vec<InstrSet> = Vec::new();
    for set in items.values() {
        match ports.iter_mut().find(|p| p.disjoint(set)) {
            Some(p) => p.union_with(set),
            None => ports.push(set.clone()),
        }
    }
    ports.len()
}

fn infer_ports(
    model: &SpecModel,
    mia: &MiaSpec,
    ipg: &Ipg,
    plans: &[InstrPlan],
) -> Result<BTreeMap<Resource, Ports>, MiaError> {
    let k = mia.stages.len();
    let mut rd: BTreeMap<(Resource, usize), BTreeMap<usize, InstrSet>> = BTreeMap::new();
    let mut wr: BTreeMap<(Resource, usize), BTreeMap<usize, InstrSet>> = BTreeMap::new();
    for (i, plan) in plans.iter().enumerate() {
        for r in &plan.reads {
            let id = ipg.maps[i][r.node];
            rd.entry((r.res, r.stage)).or_default().entry(id).or_default().insert(i);
        }
        for w in &plan.writes {
            if w.res == Resource::Pc {
                continue;
            }
            let id = ipg.maps[i][w.node];
            wr.entry((w.res, w.stage)).or_default().entry(id).or_default().insert(i);
        }
    }
    let mut out: BTreeMap<Resource, Ports> = BTreeMap::new();
    for ((r, s), items) in &rd {
        let e = out.entry(*r).or_insert_with(|| Ports {
            reads: vec![0; k],
            writes: vec![0; k],
        });
        e.reads[*s] = color(items);
    }
    for ((r, s), items) in &wr {
        let e = out.entry(*r).or_insert_with(|| Ports {
            reads: vec![0; k],
            writes: vec![0; k],
        });
        e.writes[*s] = color(items);
    }
    for (m, mem) in model.memories.iter().enumerate() {
        let p = out.get(&Resource::Mem(m)).cloned().unwrap_or_default();
        let fetch = usize::from(mia.unified_memory && m == 0);
        let reads = p.read_count() + fetch;
        if reads > 1 {
            return Err(MiaError::PortConflict {
                resource: mem.name.clone(),
                kind: "read",
                count: reads,
            });
        }
        if p.write_count() > 1 {
            return Err(MiaError::PortConflict {
                resource: mem.name.clone(),
                kind: "write",
                count: p.write_count(),
            });
        }
    }
    Ok(out)
}

fn pipeline_registers(
    model: &SpecModel,
    ipg: &Ipg,
    graphs: &[BehaviorGraph],
    plans: &[InstrPlan],
    k: usize,
    decode: usize,
) -> Vec<Vec<PipeReg>> {
    let mut out = Vec::new();
    for b in 0..k.saturating_sub(1) {
        let mut regs: Vec<PipeReg> = Vec::new();
        if b < decode {
            regs.push(PipeReg {
                width: model.word_width(),
                nodes: vec![],
                label: Some("instruction word"),
            });
            regs.push(PipeReg {
                width: model.pc.as_ref().map(|p| p.width).unwrap_or(32),
                nodes: vec![],
                label: Some("fetch address"),
            });
        }
        let mut live: HashMap<usize, InstrSet> = HashMap::new();
        for (i, (g, plan)) in graphs.iter().zip(plans).enumerate() {
            for (u, node) in g.nodes.iter().enumerate() {
                let Some(su) = plan.stage_of[u] else { continue };
                if su <= b {
                    continue;
                }
                for &a in &node.args {
                    if plan.stage_of[a].is_some_and(|sa| sa <= b) {
                        live.entry(ipg.maps[i][a]).or_default().insert(i);
                    }
                }
            }
        }
        let mut items: Vec<(usize, InstrSet)> = live.into_iter().collect();
        items.sort_by_key(|(id, _)| (std::cmp::Reverse(ipg.nodes[*id].width), *id));
        let mut merged: Vec<(PipeReg, InstrSet)> = Vec::new();
        for (id, set) in items {
            match merged.iter_mut().find(|(_, used)| used.disjoint(&set)) {
                Some((reg, used)) => {
                    used.union_with(&set);
                    reg.nodes.push((id, set));
                }
                None => merged.push((
                    PipeReg {
                        width: ipg.nodes[id].width,
                        nodes: vec![(id, set.clone())],
                        label: None,
                    },
                    set,
                )),
            }
        }
        regs.extend(merged.into_iter().map(|(r, _)| r));
        out.push(regs);
    }
    out
}

fn hazard_rules(plans: &[InstrPlan]) -> Vec<HazardRule> {
    let mut consumers: BTreeMap<(Resource, usize), bool> = BTreeMap::new();
    let mut producers: BTreeMap<Resource, Vec<(usize, usize)>> = BTreeMap::new();
    for plan in plans {
        for r in &plan.reads {
            *consumers.entry((r.res, r.stage)).or_default() |= r.forward;
        }
        for w in &plan.writes {
            producers.entry(w.res).or_default().push((w.stage, w.ready));
        }
    }
    let mut out = Vec::new();
    for ((res, c), fwd) in consumers {
        let Some(ws) = producers.get(&res) else { continue };
        let max_w = ws.iter().map(|w| w.0).max().unwrap_or(0);
        let min_ready = ws.iter().map(|w| w.1).min().unwrap_or(usize::MAX);
        let stages: Vec<usize> = (c + 1..=max_w).collect();
        if stages.is_empty() {
            continue;
        }
        let forward_from = if fwd {
            stages.iter().copied().filter(|&p| p >= min_ready).collect()
        } else {
            vec![]
        };
        out.push(HazardRule {
            res,
            consumer: c,
            producers: stages,
            forward_from,
        });
    }
    out
}

/// Finds `name` in the model and resolves it.
pub fn resolve_named(model: &SpecModel, name: &str, graphs: &[BehaviorGraph]) -> Result<PipelineModel, MiaError> {
    let mia = model.mia(name).ok_or_else(|| MiaError::UnknownMia(name.to_string()))?;
    resolve(model, mia, graphs)
}

