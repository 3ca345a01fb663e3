//! The instruction progress graph: all behavior graphs merged into one.

use std::collections::HashMap;
use std::fmt;

use crate::frontend::model::SpecModel;
use crate::ir::{apply_pure, effect_of, eval_node, BehaviorGraph, Effect, Inputs, NodeKind};
use crate::value::Value;

/// A set of instruction indices.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstrSet(Vec<u64>);

impl InstrSet {
    pub fn single(i: usize) -> Self {
        let mut s = InstrSet::default();
        s.insert(i);
        s
    }

    pub fn insert(&mut self, i: usize) {
        let w = i / 64;
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        self.0[w] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn union_with(&mut self, o: &InstrSet) {
        if self.0.len() < o.0.len() {
            self.0.resize(o.0.len(), 0);
        }
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a |= b;
        }
    }

    pub fn disjoint(&self, o: &InstrSet) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & b == 0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(k, &w)| (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| k * 64 + b))
    }
}

impl fmt::Debug for InstrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IpgKind {
    /// Format field, identified by its bit ranges so formats share it.
    Field(Vec<(u32, u32)>),
    /// Access function of a format.
    Access(usize, usize),
    Op(NodeKind),
    /// Picks the argument whose set contains the current instruction.
    Mux(Vec<InstrSet>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IpgNode {
    pub kind: IpgKind,
    pub args: Vec<usize>,
    pub width: u32,
    pub origins: InstrSet,
}

#[derive(Clone, Debug)]
pub struct Ipg {
    pub nodes: Vec<IpgNode>,
    /// Per instruction: behavior-graph node to IPG node (`usize::MAX` for
    /// start and end).
    pub maps: Vec<Vec<usize>>,
}

type Key = (IpgKind, Vec<usize>, u32);

struct Builder {
    nodes: Vec<IpgNode>,
    index: HashMap<Key, usize>,
    by_kind: HashMap<(IpgKind, usize, u32), Vec<usize>>,
}

impl Builder {
    fn key(&self, id: usize) -> Key {
        let n = &self.nodes[id];
        (n.kind.clone(), n.args.clone(), n.width)
    }

    /// Whether `from` depends on `to`.
    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if !std::mem::replace(&mut seen[n], true) {
                stack.extend(&self.nodes[n].args);
            }
        }
        false
    }

    /// Argument `a` of node `n` as instruction `i` sees it.
    fn arg_for(&self, a: usize, i: usize) -> usize {
        match &self.nodes[a].kind {
            IpgKind::Mux(sets) => self.nodes[a].args[sets.iter().position(|s| s.contains(i)).unwrap_or(0)],
            _ => a,
        }
    }

    fn try_merge(&mut self, cand: usize, args: &[usize], instr: usize) -> bool {
        let n = &self.nodes[cand];
        if n.origins.contains(instr) {
            return false;
        }
        let shared = n.args.iter().zip(args).filter(|(a, b)| a == b).count();
        if shared == 0 {
            return false;
        }
        let differing: Vec<usize> = (0..args.len()).filter(|&k| n.args[k] != args[k]).collect();
        for &k in &differing {
            if self.reaches(args[k], cand) {
                return false;
            }
        }
        let old_key = self.key(cand);
        for k in differing {
            let cur = self.nodes[cand].args[k];
            let mine = args[k];
            let origins = self.nodes[cand].origins.clone();
            match &self.nodes[cur].kind {
                IpgKind::Mux(_) => {
                    let m = &mut self.nodes[cur];
                    let IpgKind::Mux(sets) = &mut m.kind else { unreachable!() };
                    match m.args.iter().position(|&x| x == mine) {
                        Some(p) => sets[p].insert(instr),
                        None => {
                            sets.push(InstrSet::single(instr));
                            m.args.push(mine);
                        }
                    }
                    m.origins.insert(instr);
                }
                _ => {
                    let mut all = origins.clone();
                    all.insert(instr);
                    let width = self.nodes[cur].width;
                    self.nodes.push(IpgNode {
                        kind: IpgKind::Mux(vec![origins, InstrSet::single(instr)]),
                        args: vec![cur, mine],
                        width,
                        origins: all,
                    });
                    let mux = self.nodes.len() - 1;
                    self.nodes[cand].args[k] = mux;
                }
            }
        }
        self.nodes[cand].origins.insert(instr);
        self.index.remove(&old_key);
        let nk = self.key(cand);
        self.index.insert(nk, cand);
        true
    }

    fn add(&mut self, kind: IpgKind, args: Vec<usize>, width: u32, instr: usize) -> usize {
        let key = (kind.clone(), args.clone(), width);
        if let Some(&id) = self.index.get(&key) {
            self.nodes[id].origins.insert(instr);
            return id;
        }
        let leaf = matches!(kind, IpgKind::Field(_) | IpgKind::Access(..))
            || matches!(&kind, IpgKind::Op(k) if k.is_leaf());
        let bucket = (kind.clone(), args.len(), width);
        if !leaf && !args.is_empty() {
            let mut cands: Vec<usize> = self.by_kind.get(&bucket).cloned().unwrap_or_default();
            // prefer the candidate that already agrees on the most arguments
            cands.sort_by_key(|&c| {
                let same = self.nodes[c]
                    .args
                    .iter()
                    .zip(&args)
                    .filter(|(a, b)| self.arg_for(**a, instr) == **b || a == b)
                    .count();
                (std::cmp::Reverse(same), c)
            });
            for c in cands {
                if self.try_merge(c, &args, instr) {
                    return c;
                }
            }
        }
        self.nodes.push(IpgNode {
            kind,
            args,
            width,
            origins: InstrSet::single(instr),
        });
        let id = self.nodes.len() - 1;
        self.index.insert(key, id);
        self.by_kind.entry(bucket).or_default().push(id);
        id
    }
}

/// Merges the canonical graphs of all instructions.
pub fn build_ipg(model: &SpecModel, graphs: &[BehaviorGraph]) -> Ipg {
    let mut b = Builder {
        nodes: Vec::new(),
        index: HashMap::new(),
        by_kind: HashMap::new(),
    };
    let mut maps = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let fmt_idx = model.instructions[g.instr].format;
        let fmt = &model.formats[fmt_idx];
        let mut map = vec![usize::MAX; g.nodes.len()];
        for (id, n) in g.nodes.iter().enumerate() {
            let kind = match &n.kind {
                NodeKind::Start | NodeKind::End => continue,
                NodeKind::Field(f) => IpgKind::Field(fmt.fields[*f].ranges.clone()),
                NodeKind::Access(a) => IpgKind::Access(fmt_idx, *a),
                k => IpgKind::Op(k.clone()),
            };
            let args = n.args.iter().map(|&a| map[a]).collect();
            map[id] = b.add(kind, args, n.width, i);
        }
        maps.push(map);
    }
    Ipg { nodes: b.nodes, maps }
}

impl Ipg {
    /// Argument list of `n` with multiplexers resolved for instruction `i`.
    pub fn args_for(&self, n: usize, i: usize) -> Vec<usize> {
        self.nodes[n]
            .args
            .iter()
            .map(|&a| match &self.nodes[a].kind {
                IpgKind::Mux(sets) => self.nodes[a].args[sets.iter().position(|s| s.contains(i)).expect("mux arm")],
                _ => a,
            })
            .collect()
    }

    pub fn mux_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, IpgKind::Mux(_))).count()
    }

    /// Evaluates the view of the `i`th merged graph `g`. Field leaves are
    /// looked up through the instruction's own format.
    pub fn evaluate_view(&self, model: &SpecModel, i: usize, g: &BehaviorGraph, inp: &mut dyn Inputs) -> Vec<Effect> {
        let fmt = model.format_of(g.instr);
        let mut vals: HashMap<usize, Value> = HashMap::new();
        let mut effects = Vec::new();
        let order: Vec<usize> = self.maps[i].iter().copied().filter(|&x| x != usize::MAX).collect();
        for &n in &order {
            let node = &self.nodes[n];
            let args: Vec<Value> = self.args_for(n, i).iter().map(|a| vals[a]).collect();
            let v = match &node.kind {
                IpgKind::Field(r) => Some(inp.field(fmt.fields.iter().position(|f| &f.ranges == r).unwrap())),
                IpgKind::Access(_, a) => Some(inp.access(*a)),
                IpgKind::Mux(_) => unreachable!("muxes are resolved"),
                IpgKind::Op(k) => {
                    let tmp = crate::ir::Node {
                        kind: k.clone(),
                        args: vec![],
                        width: node.width,
                    };
                    if k.is_effect() {
                        effects.extend(effect_of(&tmp, &args));
                        None
                    } else if k.is_pure() {
                        Some(apply_pure(&tmp, &args))
                    } else {
                        eval_node(&tmp, &args, inp)
                    }
                }
            };
            if let Some(v) = v {
                vals.insert(n, v);
            }
        }
        effects
    }
}
