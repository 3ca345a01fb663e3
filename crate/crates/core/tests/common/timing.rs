//! Event-based timing model of an in-order pipeline, for checking the cycle
//! counts of the pipeline simulator.
//!
//! Every instruction `i` is summarized by `e[i][s]`, the cycle in which it
//! executes stage `s`; it enters stage `s` the cycle after `e[i][s-1]` and
//! waits there until all constraints on `e[i][s]` hold:
//!
//! * stage order and occupancy: after `e[i][s-1]`, and not before the
//!   previous instruction has executed stage `s+1`;
//! * hazards: a read at `s` of a location last written by an older producer
//!   `p` waits until `p` has executed its write stage, or, when the read may
//!   be forwarded, until `p` has executed the stage before its ready stage;
//! * freezing: while any older instruction waits in a stage `>= s`, nothing
//!   executes stage `s`.
//!
//! A control transfer whose target differs from the fall-through address
//! discards everything behind it in the cycle it executes its redirect stage;
//! the correct path is fetched the cycle after. Instructions fetched down the
//! wrong path are scheduled too, because their waits before the flush count
//! as stall cycles.

use std::collections::BTreeSet;

use pdl_core::frontend::model::Resource;
use pdl_core::ir::NodeKind;
use pdl_core::iss::{Isa, Iss};
use pdl_core::mia::PipelineModel;
use pdl_core::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timing {
    pub cycles: u64,
    pub retired: u64,
    pub stalls: u64,
    pub flushes: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Loc {
    Any,
    Index(u128),
}

struct Read {
    stage: usize,
    res: Resource,
    loc: Loc,
    forward: bool,
}

struct WriteInfo {
    stage: usize,
    ready: usize,
    res: Resource,
    loc: Loc,
}

struct Entry {
    e: Vec<u64>,
    writes: Vec<WriteInfo>,
    /// Waits as (stage, first cycle, last cycle).
    waits: Vec<(usize, u64, u64)>,
}

struct Sites {
    reads: Vec<Read>,
    writes: Vec<WriteInfo>,
    redirect: Option<usize>,
}

fn index_of(isa: &Isa<'_>, instr: usize, fields: &[Value], node: usize, res: Resource) -> Loc {
    let Resource::File(f) = res else { return Loc::Any };
    let g = &isa.graphs[instr];
    let idx = g.nodes[node].args[0];
    let raw = match g.nodes[idx].kind {
        NodeKind::Field(i) => fields[i].bits(),
        NodeKind::Const(v) => v.bits(),
        ref k => panic!("timing model needs field or constant register indices, found {k}"),
    };
    Loc::Index(raw & ((1u128 << isa.model.files[f].index_width) - 1))
}

fn sites(isa: &Isa<'_>, pm: &PipelineModel, word: u128) -> Sites {
    let Some(d) = isa.decode(word) else {
        return Sites { reads: vec![], writes: vec![], redirect: None };
    };
    let plan = &pm.plans[d.instr];
    let reads = plan
        .reads
        .iter()
        .filter_map(|r| {
            let loc = index_of(isa, d.instr, &d.fields, r.node, r.res);
            let hard = match (r.res, loc) {
                (Resource::File(f), Loc::Index(i)) => isa.model.files[f].hardwired.contains_key(&i),
                _ => false,
            };
            (!hard).then_some(Read {
                stage: r.stage,
                res: r.res,
                loc,
                forward: r.forward && matches!(r.res, Resource::File(_) | Resource::Reg(_)),
            })
        })
        .collect();
    let writes = plan
        .writes
        .iter()
        .map(|w| WriteInfo {
            stage: w.stage,
            ready: w.ready,
            res: w.res,
            loc: index_of(isa, d.instr, &d.fields, w.node, w.res),
        })
        .collect();
    Sites { reads, writes, redirect: plan.redirect }
}

struct Model {
    k: usize,
    entries: Vec<Entry>,
    /// Entries that later instructions may depend on: the correct path plus
    /// the wrong path currently being scheduled.
    visible: Vec<usize>,
}

impl Model {
    fn frozen(&self, t: u64, s: usize) -> bool {
        self.entries
            .iter()
            .any(|en| en.waits.iter().any(|&(c, a, b)| c >= s && a <= t && t <= b))
    }

    fn schedule(&mut self, st: Sites, prev: Option<usize>, min_fetch: u64, clip: Option<u64>) -> usize {
        let k = self.k;
        let fetch = match prev {
            Some(p) => min_fetch.max(self.entries[p].e[0] + 1),
            None => min_fetch.max(1),
        };
        let mut e = vec![0u64; k];
        let mut waits = Vec::new();
        for s in 0..k {
            let arrive = if s == 0 { fetch } else { e[s - 1] + 1 };
            let mut lb = arrive;
            if let Some(p) = prev {
                let pe = &self.entries[p].e;
                if s + 1 < k {
                    lb = lb.max(pe[s + 1]);
                } else {
                    lb = lb.max(pe[k - 1] + 1);
                }
            }
            for r in st.reads.iter().filter(|r| r.stage == s) {
                let producer = self.visible.iter().rev().find_map(|&j| {
                    self.entries[j]
                        .writes
                        .iter()
                        .find(|w| w.res == r.res && (w.loc == Loc::Any || r.loc == Loc::Any || w.loc == r.loc))
                        .map(|w| (j, w))
                });
                if let Some((j, w)) = producer {
                    let pe = &self.entries[j].e;
                    let bound = if r.forward {
                        if w.ready == 0 {
                            0
                        } else {
                            pe[w.ready - 1] + 1
                        }
                    } else {
                        pe[w.stage] + 1
                    };
                    lb = lb.max(bound);
                }
            }
            let mut t = lb;
            while self.frozen(t, s) {
                t += 1;
            }
            e[s] = t;
            if arrive < t {
                let last = match clip {
                    Some(c) => (t - 1).min(c.saturating_sub(1)),
                    None => t - 1,
                };
                if arrive <= last {
                    waits.push((s, arrive, last));
                }
            }
            if clip.is_some_and(|c| t >= c) {
                for x in &mut e[s + 1..] {
                    *x = u64::MAX / 2;
                }
                break;
            }
        }
        self.entries.push(Entry { e, writes: st.writes, waits });
        self.entries.len() - 1
    }
}

/// Timing of `image` from `start` to `stop` on `pm`.
pub fn pipeline_timing(isa: &Isa<'_>, pm: &PipelineModel, image: &[u8], base: u128, start: u128, stop: u128) -> Timing {
    let mut iss = Iss::new(isa, false);
    iss.load_program(image, base).unwrap();
    let fetch_mem = iss.state.mems[0].clone();
    iss.state.pc = Value::new(start, iss.state.pc.width());
    let mut path: Vec<(u128, u128)> = Vec::new();
    let r = iss.run(Some(stop), 1_000_000, &mut |t| path.push((t.pc.bits(), t.word.bits())));
    assert!(r.error.is_none(), "program faults: {:?}", r.error);
    let final_pc = iss.state.pc.bits();

    let step = isa.word_bytes();
    let k = pm.depth();
    let mut m = Model { k, entries: Vec::new(), visible: Vec::new() };
    let mut flush_cycles = BTreeSet::new();
    let mut flushes = 0;
    let mut prev: Option<usize> = None;
    let mut min_fetch = 1;
    for (i, &(pc, word)) in path.iter().enumerate() {
        let next = path.get(i + 1).map(|p| p.0).unwrap_or(final_pc);
        let st = sites(isa, pm, word);
        let redirect = st.redirect;
        let idx = m.schedule(st, prev, min_fetch, None);
        m.visible.push(idx);
        prev = Some(idx);
        let Some(v) = redirect else { continue };
        if next == pc + step {
            continue;
        }
        let flush = m.entries[idx].e[v];
        flush_cycles.insert(flush);
        if v > pm.fetch_stage {
            flushes += 1;
        }
        let keep = m.visible.len();
        let mut wprev = idx;
        let mut wpc = pc + step;
        while m.entries[wprev].e[0] < flush && wpc != stop {
            let word = fetch_mem.read(wpc, isa.word_units).bits();
            let w = m.schedule(sites(isa, pm, word), Some(wprev), 1, Some(flush));
            m.visible.push(w);
            wprev = w;
            wpc += step;
        }
        m.visible.truncate(keep);
        min_fetch = flush + 1;
    }

    let mut stalled = BTreeSet::new();
    for en in &m.entries {
        for &(_, a, b) in &en.waits {
            stalled.extend(a..=b);
        }
    }
    let stalls = stalled.difference(&flush_cycles).count() as u64;
    Timing {
        cycles: prev.map(|p| m.entries[p].e[k - 1]).unwrap_or(0),
        retired: path.len() as u64,
        stalls,
        flushes,
    }
}
