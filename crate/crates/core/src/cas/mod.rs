//! Cycle-accurate simulation of a resolved pipeline.

mod cosim;

use crate::frontend::model::Resource;
use crate::ir::{apply_pure, effect_of, Effect, NodeKind};
use crate::iss::{DecodedInstr, Isa, IssError, MachineState, TraceRecord, Write};
use crate::mia::PipelineModel;
use crate::value::{mask, Value};

pub use cosim::{cosim, CosimReport, Divergence};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CasError {
    #[error("invalid instruction {word:#x} at {pc:#x} reached stage {stage}")]
    InvalidInstruction { pc: u128, word: u128, stage: String },
    #[error("misaligned fetch at {pc:#x}")]
    MisalignedFetch { pc: u128 },
    #[error("no stop after {0} cycles")]
    MaxCycles(u64),
    #[error(transparent)]
    Load(#[from] IssError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CasStats {
    /// Cycle of the last retirement.
    pub cycles: u64,
    pub retired: u64,
    /// Cycles in which some stage was held back by a hazard.
    pub stalls: u64,
    /// Mispredicted control transfers.
    pub flushes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CasResult {
    pub stats: CasStats,
    pub error: Option<CasError>,
}

#[derive(Clone, Debug)]
enum Kind {
    Instr(DecodedInstr, String),
    Unknown,
    Misaligned,
    /// Fetch reached the stop address.
    Stop,
}

#[derive(Clone, Debug)]
struct Ctx {
    pc: Value,
    word: Value,
    kind: Kind,
    vals: Vec<Option<Value>>,
    writes: Vec<Write>,
}

impl Ctx {
    fn instr(&self) -> Option<&DecodedInstr> {
        match &self.kind {
            Kind::Instr(d, _) => Some(d),
            _ => None,
        }
    }
}

pub struct Cas<'a, 'm> {
    pub isa: &'a Isa<'m>,
    pub pm: &'a PipelineModel,
    pub state: MachineState,
    stages: Vec<Option<Ctx>>,
    fetch_pc: Value,
    fetching: bool,
    stop: Option<u128>,
    cycle: u64,
    pub stats: CasStats,
}

/// Index ranges touched by a read or write, for hazard comparison.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Loc {
    Whole,
    Index(u128),
    Range(u128, u128),
    Unknown,
}

fn overlaps(a: Loc, b: Loc) -> bool {
    match (a, b) {
        (Loc::Unknown, _) | (_, Loc::Unknown) | (Loc::Whole, _) | (_, Loc::Whole) => true,
        (Loc::Index(x), Loc::Index(y)) => x == y,
        (Loc::Range(a0, a1), Loc::Range(b0, b1)) => a0 < b1 && b0 < a1,
        _ => true,
    }
}

impl<'a, 'm> Cas<'a, 'm> {
    pub fn new(isa: &'a Isa<'m>, pm: &'a PipelineModel) -> Self {
        Cas {
            isa,
            pm,
            state: MachineState::new(isa.model),
            stages: vec![None; pm.depth()],
            fetch_pc: Value::zero(isa.model.pc.as_ref().map(|p| p.width).unwrap_or(32)),
            fetching: true,
            stop: None,
            cycle: 0,
            stats: CasStats::default(),
        }
    }

    pub fn load_program(&mut self, image: &[u8], base: u128) -> Result<(), IssError> {
        self.state.load_image(0, image, base)
    }

    pub fn set_start(&mut self, pc: u128) {
        self.fetch_pc = Value::new(pc, self.fetch_pc.width());
        self.state.pc = self.fetch_pc;
    }

    fn make_ctx(&self, pc: Value) -> Ctx {
        let step = self.isa.word_bytes();
        let word = self.state.mems[0].read(pc.bits(), self.isa.word_units);
        let kind = if Some(pc.bits()) == self.stop {
            Kind::Stop
        } else if !pc.bits().is_multiple_of(step) {
            Kind::Misaligned
        } else {
            match self.isa.decode(word.bits()) {
                Some(d) => {
                    let t = self.isa.text(&d);
                    Kind::Instr(d, t)
                }
                None => Kind::Unknown,
            }
        };
        let n = match &kind {
            Kind::Instr(d, _) => self.isa.graphs[d.instr].nodes.len(),
            _ => 0,
        };
        Ctx {
            pc,
            word: Value::new(word.bits(), self.isa.model.word_width()),
            kind,
            vals: vec![None; n],
            writes: Vec::new(),
        }
    }

    /// Value of `n` computed from what `c` already knows, without reads.
    fn peek(&self, c: &Ctx, n: usize) -> Option<Value> {
        if let Some(v) = c.vals.get(n).copied().flatten() {
            return Some(v);
        }
        let d = c.instr()?;
        let node = &self.isa.graphs[d.instr].nodes[n];
        match &node.kind {
            NodeKind::Const(v) => Some(*v),
            NodeKind::Field(i) => Some(d.fields[*i]),
            NodeKind::Access(i) => Some(d.access[*i]),
            NodeKind::ReadPc => Some(self.isa.pc_view(c.pc)),
            k if k.is_pure() => {
                let args: Option<Vec<Value>> = node.args.iter().map(|&a| self.peek(c, a)).collect();
                Some(apply_pure(node, &args?))
            }
            _ => None,
        }
    }

    fn read_loc(&self, c: &Ctx, n: usize) -> Loc {
        let d = c.instr().expect("instruction");
        let node = &self.isa.graphs[d.instr].nodes[n];
        match node.kind {
            NodeKind::ReadFile(f) => match self.peek(c, node.args[0]) {
                Some(i) => Loc::Index(i.bits() & mask(self.isa.model.files[f].index_width)),
                None => Loc::Unknown,
            },
            NodeKind::ReadMem { units, .. } => match self.peek(c, node.args[0]) {
                Some(a) => Loc::Range(a.bits(), a.bits() + units as u128),
                None => Loc::Unknown,
            },
            _ => Loc::Whole,
        }
    }

    fn write_loc(&self, c: &Ctx, n: usize) -> Loc {
        let d = c.instr().expect("instruction");
        let node = &self.isa.graphs[d.instr].nodes[n];
        match node.kind {
            NodeKind::WriteFile(f) => match self.peek(c, node.args[0]) {
                Some(i) => Loc::Index(i.bits() & mask(self.isa.model.files[f].index_width)),
                None => Loc::Unknown,
            },
            NodeKind::WriteMem { units, .. } => match self.peek(c, node.args[0]) {
                Some(a) => Loc::Range(a.bits(), a.bits() + units as u128),
                None => Loc::Unknown,
            },
            _ => Loc::Whole,
        }
    }

    fn hardwired(&self, res: Resource, loc: Loc) -> bool {
        match (res, loc) {
            (Resource::File(f), Loc::Index(i)) => self.isa.model.files[f].hardwired.contains_key(&i),
            _ => false,
        }
    }

    /// Where the consumer in stage `s` gets the value of read `n`: `Err(())`
    /// means it must stall, `Ok(None)` reads the committed state and
    /// `Ok(Some(v))` is a forwarded value. Before evaluation (`probe`) a
    /// producer in its ready stage has not computed the value yet but will
    /// have by the time the consumer runs.
    fn source(&self, s: usize, n: usize, probe: bool) -> Result<Option<Value>, ()> {
        let c = self.stages[s].as_ref().expect("consumer");
        let d = c.instr().expect("instruction");
        let plan = &self.pm.plans[d.instr];
        let site = plan.reads.iter().find(|r| r.node == n).expect("read site");
        let loc = self.read_loc(c, n);
        if self.hardwired(site.res, loc) {
            return Ok(None);
        }
        for p in s + 1..self.stages.len() {
            let Some(a) = self.stages[p].as_ref() else { continue };
            let Some(ad) = a.instr() else { continue };
            let aplan = &self.pm.plans[ad.instr];
            for w in aplan.writes.iter().rev() {
                if w.res != site.res || p > w.stage {
                    continue;
                }
                if !overlaps(loc, self.write_loc(a, w.node)) {
                    continue;
                }
                if !(site.forward && p >= w.ready) {
                    return Err(());
                }
                let g = &self.isa.graphs[ad.instr];
                let wn = &g.nodes[w.node];
                let guard = wn.guard().map(|x| self.peek(a, x));
                match guard {
                    Some(None) => return Err(()),
                    Some(Some(gv)) if !gv.is_true() => continue,
                    _ => {}
                }
                if !matches!(loc, Loc::Index(_) | Loc::Whole) {
                    // partial overlaps of memory are not bypassed
                    return Err(());
                }
                if probe {
                    return Ok(None);
                }
                let v = wn.value().and_then(|v| self.peek(a, v));
                return Ok(Some(v.expect("forwarded value computed in an older stage")));
            }
        }
        Ok(None)
    }

    fn hazard(&self, s: usize) -> bool {
        let Some(c) = self.stages[s].as_ref() else { return false };
        let Some(d) = c.instr() else { return false };
        self.pm.plans[d.instr]
            .reads
            .iter()
            .filter(|r| r.stage == s)
            .any(|r| self.source(s, r.node, true).is_err())
    }

    fn eval_stage(&mut self, s: usize, pending: &mut Vec<(usize, Effect)>) {
        let c = self.stages[s].as_ref().expect("occupant");
        let d = c.instr().expect("instruction").clone();
        let g = &self.isa.graphs[d.instr];
        let plan = &self.pm.plans[d.instr];
        let mut vals = c.vals.clone();
        for &n in &plan.by_stage[s] {
            let node = &g.nodes[n];
            let args: Vec<Value> = node.args.iter().map(|&a| vals[a].expect("argument placed earlier")).collect();
            if node.kind.is_effect() {
                if let Some(e) = effect_of(node, &args) {
                    pending.push((s, e));
                }
                continue;
            }
            let v = match &node.kind {
                NodeKind::Const(v) => *v,
                NodeKind::Field(i) => d.fields[*i],
                NodeKind::Access(i) => d.access[*i],
                NodeKind::ReadPc => self.isa.pc_view(c.pc),
                NodeKind::ReadReg(r) => match self.source(s, n, false) {
                    Ok(Some(v)) => v,
                    _ => self.state.regs[*r],
                },
                NodeKind::ReadFile(f) => match self.source(s, n, false) {
                    Ok(Some(v)) => v,
                    _ => self.state.file(*f, args[0]),
                },
                NodeKind::ReadMem { mem, units } => self.state.mems[*mem].read(args[0].bits(), *units),
                _ => apply_pure(node, &args),
            };
            vals[n] = Some(v);
        }
        self.stages[s].as_mut().unwrap().vals = vals;
    }

    /// Next PC the occupant of `s` actually continues at.
    fn actual_next(&self, c: &Ctx) -> Value {
        let d = c.instr().expect("instruction");
        let plan = &self.pm.plans[d.instr];
        let g = &self.isa.graphs[d.instr];
        if let Some(w) = plan.pc_write {
            let wn = &g.nodes[w];
            let taken = wn.guard().is_none_or(|x| c.vals[x].is_some_and(|v| v.is_true()));
            if taken {
                let v = c.vals[wn.value().expect("pc value")].expect("pc value ready");
                return Value::new(v.bits(), c.pc.width());
            }
        }
        self.isa.next_pc(c.pc)
    }

    /// Advances one clock. Returns whether the pipeline has drained at the stop.
    pub fn cycle(&mut self, trace: &mut dyn FnMut(&TraceRecord)) -> Result<bool, CasError> {
        self.cycle += 1;
        let k = self.stages.len();
        let fs = self.pm.fetch_stage;
        if self.fetching && self.stages[fs].is_none() {
            let ctx = self.make_ctx(self.fetch_pc);
            if matches!(ctx.kind, Kind::Stop) {
                self.fetching = false;
            } else {
                self.fetch_pc = self.isa.next_pc(self.fetch_pc);
            }
            self.stages[fs] = Some(ctx);
        }

        let stall = (0..k).rev().find(|&s| self.hazard(s));
        let mut flush: Option<(usize, Value, bool)> = None;
        let mut pending: Vec<(usize, Effect)> = Vec::new();
        for s in (0..k).rev() {
            if stall.is_some_and(|c| s <= c) || flush.is_some_and(|(v, ..)| s < v) {
                continue;
            }
            let Some(c) = self.stages[s].as_ref() else { continue };
            match c.kind {
                Kind::Stop => continue,
                Kind::Unknown | Kind::Misaligned => {
                    if s == self.pm.check_stage {
                        return Err(match c.kind {
                            Kind::Unknown => CasError::InvalidInstruction {
                                pc: c.pc.bits(),
                                word: c.word.bits(),
                                stage: self.pm.stages[s].clone(),
                            },
                            _ => CasError::MisalignedFetch { pc: c.pc.bits() },
                        });
                    }
                    continue;
                }
                Kind::Instr(..) => {}
            }
            let first = pending.len();
            self.eval_stage(s, &mut pending);
            let c = self.stages[s].as_ref().unwrap();
            let plan = &self.pm.plans[c.instr().unwrap().instr];
            if plan.redirect == Some(s) {
                let next = self.actual_next(c);
                if next != self.isa.next_pc(c.pc) {
                    flush = Some((s, next, true));
                    continue;
                }
            }
            // a store over an instruction already fetched makes it stale
            for (_, e) in &pending[first..] {
                if let Effect::Mem { mem: 0, units, addr, .. } = e {
                    let lo = addr.bits();
                    let hi = lo + *units as u128;
                    let step = self.isa.word_bytes();
                    let stale = self.stages[..s].iter().flatten().any(|y| {
                        !matches!(y.kind, Kind::Stop) && y.pc.bits() < hi && lo < y.pc.bits() + step
                    });
                    if stale {
                        flush = Some((s, self.actual_next(c), false));
                    }
                }
            }
        }

        // commit
        for (s, e) in pending {
            if let Some(w) = self.state.apply(self.isa.model, &e) {
                self.stages[s].as_mut().unwrap().writes.push(w);
            }
        }
        if stall.is_some() && flush.is_none() {
            self.stats.stalls += 1;
        }

        // retire
        let last = k - 1;
        let retire = match &self.stages[last] {
            Some(c) => matches!(c.kind, Kind::Instr(..)) && !stall.is_some_and(|x| x >= last),
            None => false,
        };
        if retire {
            let mut c = self.stages[last].take().unwrap();
            let Kind::Instr(_, text) = std::mem::replace(&mut c.kind, Kind::Unknown) else { unreachable!() };
            c.writes.sort();
            trace(&TraceRecord {
                pc: c.pc,
                word: c.word,
                text,
                writes: c.writes,
            });
            self.state.retired += 1;
            self.stats.retired += 1;
            self.stats.cycles = self.cycle;
        }

        if let Some((v, target, mispredict)) = flush {
            for st in &mut self.stages[..v] {
                *st = None;
            }
            self.fetch_pc = target;
            self.fetching = true;
            if mispredict && v > self.pm.fetch_stage {
                self.stats.flushes += 1;
            }
        }

        // advance
        for s in (0..last).rev() {
            if stall.is_some_and(|c| s <= c) {
                continue;
            }
            if matches!(self.stages[s].as_ref().map(|c| &c.kind), Some(Kind::Stop)) {
                continue;
            }
            if self.stages[s + 1].is_none() {
                self.stages[s + 1] = self.stages[s].take();
            }
        }

        let drained = self
            .stages
            .iter()
            .flatten()
            .all(|c| matches!(c.kind, Kind::Stop));
        Ok(!self.fetching && drained)
    }

    /// Runs from `start` until the stop address drains from the pipeline.
    pub fn run(
        &mut self,
        start: u128,
        stop: Option<u128>,
        max_cycles: u64,
        trace: &mut dyn FnMut(&TraceRecord),
    ) -> CasResult {
        self.set_start(start);
        self.stop = stop;
        loop {
            if self.cycle >= max_cycles {
                return CasResult {
                    stats: self.stats,
                    error: Some(CasError::MaxCycles(max_cycles)),
                };
            }
            match self.cycle(trace) {
                Ok(true) => return CasResult { stats: self.stats, error: None },
                Ok(false) => {}
                Err(e) => return CasResult { stats: self.stats, error: Some(e) },
            }
        }
    }
}
