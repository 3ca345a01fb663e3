//! Functional instruction-set simulator over the behavior graphs.

mod state;

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::asm::{access_value, Assembler};
use crate::decode::{build_decode_tree, DecodeError, DecodeTree};
use crate::frontend::model::{PcSemantics, Resource, SpecModel};
use crate::ir::{build_all, canonicalize, evaluate, BehaviorGraph, Effect, Inputs};
use crate::value::{hex_padded, Value};

pub use state::{format_writes, MachineState, SparseMem, Write};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum IssError {
    #[error("invalid instruction {word:#x} at {pc:#x}")]
    InvalidInstruction { pc: u128, word: u128 },
    #[error("misaligned fetch at {pc:#x}")]
    MisalignedFetch { pc: u128 },
    #[error("instruction at {pc:#x} writes {resource} twice")]
    DoubleWrite { pc: u128, resource: String },
    #[error("image of {len} bytes at {base:#x} overruns the address space")]
    AddressOverflow { base: u128, len: usize },
    #[error("specification has no program counter or memory")]
    NoMachine,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// A decoded instruction with its field and access-function values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedInstr {
    pub instr: usize,
    pub word: u128,
    pub fields: Vec<Value>,
    pub access: Vec<Value>,
}

/// Per-specification tables shared by the simulators.
pub struct Isa<'m> {
    pub model: &'m SpecModel,
    pub tree: DecodeTree,
    /// Canonical behavior graph per instruction.
    pub graphs: Vec<BehaviorGraph>,
    asm: Option<Assembler<'m>>,
    /// Memory units per instruction word.
    pub word_units: u32,
}

impl<'m> Isa<'m> {
    pub fn new(model: &'m SpecModel) -> Result<Self, IssError> {
        if model.pc.is_none() || model.memories.is_empty() {
            return Err(IssError::NoMachine);
        }
        let tree = build_decode_tree(model)?;
        let graphs = build_all(model).iter().map(canonicalize).collect();
        let word_units = model.word_width().div_ceil(model.memories[0].unit_width);
        Ok(Isa {
            model,
            tree,
            graphs,
            asm: Assembler::new(model).ok(),
            word_units,
        })
    }

    pub fn word_bytes(&self) -> u128 {
        self.word_units as u128
    }

    pub fn decode(&self, word: u128) -> Option<DecodedInstr> {
        let d = self.tree.decode(self.model, word)?;
        let fmt = self.model.format_of(d.instr);
        let access = (0..fmt.access.len())
            .map(|a| access_value(fmt, a, &d.fields).unwrap_or(Value::zero(1)))
            .collect();
        Some(DecodedInstr {
            instr: d.instr,
            word: d.word,
            fields: d.fields,
            access,
        })
    }

    /// Assembly text of a word, falling back to the instruction name when the
    /// syntax cannot be printed.
    pub fn text(&self, d: &DecodedInstr) -> String {
        self.asm
            .as_ref()
            .and_then(|a| a.disassemble(d.word).ok())
            .unwrap_or_else(|| self.model.instructions[d.instr].name.to_lowercase())
    }

    /// Value an instruction at `pc` sees when it reads the program counter.
    pub fn pc_view(&self, pc: Value) -> Value {
        let step = self.word_bytes();
        let k = match self.model.pc.as_ref().map(|p| p.semantics) {
            Some(PcSemantics::Next) => 1,
            Some(PcSemantics::NextNext) => 2,
            _ => 0,
        };
        pc.add(Value::new(step * k, pc.width()))
    }

    pub fn next_pc(&self, pc: Value) -> Value {
        pc.add(Value::new(self.word_bytes(), pc.width()))
    }
}

/// Leaf values for evaluating one instruction against a state.
pub struct StateInputs<'a> {
    pub state: &'a MachineState,
    pub d: &'a DecodedInstr,
    pub pc: Value,
}

impl Inputs for StateInputs<'_> {
    fn field(&mut self, i: usize) -> Value {
        self.d.fields[i]
    }
    fn access(&mut self, i: usize) -> Value {
        self.d.access[i]
    }
    fn pc(&mut self) -> Value {
        self.pc
    }
    fn reg(&mut self, r: usize) -> Value {
        self.state.regs[r]
    }
    fn file(&mut self, f: usize, index: Value) -> Value {
        self.state.file(f, index)
    }
    fn mem(&mut self, m: usize, units: u32, addr: Value) -> Value {
        self.state.mems[m].read(addr.bits(), units)
    }
}

/// Fails when two effects of one instruction hit the same location.
pub fn check_double_writes(
    model: &SpecModel,
    state: &MachineState,
    pc: u128,
    effects: &[Effect],
) -> Result<(), IssError> {
    let mut seen: HashSet<(Resource, u128)> = HashSet::new();
    let mut hit = |r: Resource, i: u128| -> Result<(), IssError> {
        if seen.insert((r, i)) {
            Ok(())
        } else {
            let name = model.resource_name(r);
            Err(IssError::DoubleWrite {
                pc,
                resource: match r {
                    Resource::File(_) => format!("{name}[{i}]"),
                    Resource::Mem(_) => format!("{name}[{i:#x}]"),
                    _ => name.to_string(),
                },
            })
        }
    };
    for e in effects {
        match *e {
            Effect::Pc(_) => hit(Resource::Pc, 0)?,
            Effect::Reg(r, _) => hit(Resource::Reg(r), 0)?,
            Effect::File(f, i, _) => hit(Resource::File(f), i.bits() & crate::value::mask(model.files[f].index_width))?,
            Effect::Mem { mem, units, addr, .. } => {
                for a in state.mems[mem].span_of(addr.bits(), units) {
                    hit(Resource::Mem(mem), a as u128)?;
                }
            }
        }
    }
    Ok(())
}

/// One retired instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub pc: Value,
    pub word: Value,
    pub text: String,
    pub writes: Vec<Write>,
}

impl TraceRecord {
    pub fn render(&self, model: &SpecModel) -> String {
        let w = format_writes(model, &self.writes);
        let head = format!(
            "{}: {} {} |",
            hex_padded(self.pc.bits(), self.pc.width()),
            hex_padded(self.word.bits(), self.word.width()),
            self.text
        );
        if w.is_empty() {
            head
        } else {
            format!("{head} {w}")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    StopHit,
    MaxSteps,
    Invalid,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::StopHit => "stop-hit",
            StopReason::MaxSteps => "max-steps",
            StopReason::Invalid => "invalid",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub steps: u64,
    pub reason: StopReason,
    pub error: Option<IssError>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    /// Entries replaced because memory no longer held the cached word.
    pub stale: u64,
}

pub struct Iss<'i, 'm> {
    pub isa: &'i Isa<'m>,
    pub state: MachineState,
    cache: Option<HashMap<u128, (DecodedInstr, String)>>,
    pub stats: CacheStats,
}

impl<'i, 'm> Iss<'i, 'm> {
    pub fn new(isa: &'i Isa<'m>, cached: bool) -> Self {
        Iss {
            isa,
            state: MachineState::new(isa.model),
            cache: cached.then(HashMap::new),
            stats: CacheStats::default(),
        }
    }

    pub fn load_program(&mut self, image: &[u8], base: u128) -> Result<(), IssError> {
        self.state.load_image(0, image, base)
    }

    fn fetch(&mut self, pc: u128, word: u128) -> Result<(DecodedInstr, String), IssError> {
        let isa = self.isa;
        let fresh = || {
            let d = isa.decode(word).ok_or(IssError::InvalidInstruction { pc, word })?;
            let t = isa.text(&d);
            Ok((d, t))
        };
        let Some(cache) = self.cache.as_mut() else {
            return fresh();
        };
        match cache.get(&pc) {
            Some(e) if e.0.word == word => {
                self.stats.hits += 1;
                Ok(e.clone())
            }
            old => {
                if old.is_some() {
                    self.stats.stale += 1;
                } else {
                    self.stats.misses += 1;
                }
                let e = fresh()?;
                cache.insert(pc, e.clone());
                Ok(e)
            }
        }
    }

    pub fn step(&mut self) -> Result<TraceRecord, IssError> {
        let isa = self.isa;
        let pc = self.state.pc;
        if !pc.bits().is_multiple_of(isa.word_bytes()) {
            return Err(IssError::MisalignedFetch { pc: pc.bits() });
        }
        let word = self.state.mems[0].read(pc.bits(), isa.word_units);
        let (d, text) = self.fetch(pc.bits(), word.bits())?;
        let mut inp = StateInputs {
            state: &self.state,
            d: &d,
            pc: isa.pc_view(pc),
        };
        let effects = evaluate(&isa.graphs[d.instr], &mut inp);
        check_double_writes(isa.model, &self.state, pc.bits(), &effects)?;
        let mut writes = Vec::new();
        let mut jumped = false;
        for e in &effects {
            jumped |= matches!(e, Effect::Pc(_));
            writes.extend(self.state.apply(isa.model, e));
        }
        if !jumped {
            self.state.pc = isa.next_pc(pc);
        }
        self.state.retired += 1;
        writes.sort();
        Ok(TraceRecord {
            pc,
            word: Value::new(word.bits(), isa.model.word_width()),
            text,
            writes,
        })
    }

    /// Steps until the PC equals `stop` (checked before executing), `max_steps`
    /// instructions retire, or an instruction faults.
    pub fn run(&mut self, stop: Option<u128>, max_steps: u64, trace: &mut dyn FnMut(&TraceRecord)) -> RunResult {
        let mut steps = 0;
        loop {
            if Some(self.state.pc.bits()) == stop {
                return RunResult { steps, reason: StopReason::StopHit, error: None };
            }
            if steps >= max_steps {
                return RunResult { steps, reason: StopReason::MaxSteps, error: None };
            }
            match self.step() {
                Ok(r) => {
                    steps += 1;
                    trace(&r);
                }
                Err(e) => {
                    return RunResult { steps, reason: StopReason::Invalid, error: Some(e) };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::Assembler;
    use crate::frontend::rv32i;

    const BASE: u128 = 0x8000_0000;

    fn image(m: &SpecModel, src: &str) -> Vec<u8> {
        Assembler::new(m).unwrap().assemble_program(src, BASE as u64).unwrap().bytes()
    }

    fn machine<'i, 'm>(isa: &'i Isa<'m>, src: &str, cached: bool) -> Iss<'i, 'm> {
        let mut s = Iss::new(isa, cached);
        s.load_program(&image(isa.model, src), BASE).unwrap();
        s.state.pc = Value::new(BASE, 32);
        s
    }

    #[test]
    fn addi_writes_and_advances() {
        let m = rv32i();
        let isa = Isa::new(&m).unwrap();
        let mut s = machine(&isa, "addi x2, x1, 3", true);
        s.state.files[0][1] = Value::new(5, 32);
        let r = s.step().unwrap();
        assert_eq!(s.state.files[0][2].bits(), 8);
        assert_eq!(s.state.pc.bits(), BASE + 4);
        assert_eq!(r.render(&m), "80000000: 00308113 addi x2, x1, 3 | X[2]=00000008");
    }

    #[test]
    fn taken_backward_branch() {
        let m = rv32i();
        let isa = Isa::new(&m).unwrap();
        let mut s = machine(&isa, "addi x0, x0, 0\nbeq x1, x1, -4", false);
        s.step().unwrap();
        let r = s.step().unwrap();
        assert_eq!(s.state.pc.bits(), BASE);
        assert_eq!(r.writes.len(), 1);
        assert_eq!(r.writes[0].res, Resource::Pc);
    }

    #[test]
    fn stop_and_step_limits() {
        let m = rv32i();
        let isa = Isa::new(&m).unwrap();
        let src = "addi x1, x0, 1\naddi x1, x1, 1\nlui x31, 0xe0000\njalr x0, 0(x31)";
        let mut s = machine(&isa, src, true);
        let r = s.run(Some(0xe000_0000), 0, &mut |_| {});
        assert_eq!((r.steps, r.reason), (0, StopReason::MaxSteps));
        let r = s.run(Some(0xe000_0000), 100, &mut |_| {});
        assert_eq!((r.steps, r.reason), (4, StopReason::StopHit));
        assert_eq!(s.state.files[0][1].bits(), 2);
    }

    #[test]
    fn invalid_and_misaligned() {
        let m = rv32i();
        let isa = Isa::new(&m).unwrap();
        let mut s = machine(&isa, ".word 0", true);
        let r = s.run(None, 10, &mut |_| {});
        assert_eq!(r.reason, StopReason::Invalid);
        assert_eq!(r.error, Some(IssError::InvalidInstruction { pc: BASE, word: 0 }));
        s.state.pc = Value::new(BASE + 2, 32);
        assert_eq!(s.step(), Err(IssError::MisalignedFetch { pc: BASE + 2 }));
    }

    #[test]
    fn stale_cache_entry_is_redecoded() {
        let m = rv32i();
        let isa = Isa::new(&m).unwrap();
        let a = Assembler::new(&m).unwrap();
        let mut s = machine(&isa, "addi x1, x1, 1\njal x0, -4", true);
        for _ in 0..4 {
            s.step().unwrap();
        }
        assert_eq!(s.state.files[0][1].bits(), 2);
        let w = a.assemble_line("addi x1, x1, 16").unwrap();
        s.state.mems[0].write(BASE, 4, Value::new(w, 32));
        s.step().unwrap();
        assert_eq!(s.state.files[0][1].bits(), 18);
        assert_eq!(s.stats.stale, 1);
        assert!(s.stats.hits >= 1);
    }

    #[test]
    fn store_then_load_word() {
        let m = rv32i();
        let isa = Isa::new(&m).unwrap();
        let src = "lui x1, 0x80001\naddi x2, x0, -2\nsw x2, 4(x1)\nlbu x3, 5(x1)\nlw x4, 4(x1)";
        let mut s = machine(&isa, src, true);
        let mut lines = Vec::new();
        s.run(None, 5, &mut |r| lines.push(r.render(&m)));
        assert_eq!(s.state.files[0][3].bits(), 0xff);
        assert_eq!(s.state.files[0][4].bits(), 0xffff_fffe);
        assert_eq!(lines[2], "80000008: 0020a223 sw x2, 4(x1) | MEM[0x80001004]=fffffffe");
    }
}
