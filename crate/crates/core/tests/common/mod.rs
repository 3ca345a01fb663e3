#![allow(dead_code)]

pub mod decode_ref;
pub mod oracle;
pub mod pattern_eval;
pub mod programs;
pub mod timing;

use std::path::PathBuf;

use pdl_core::asm::Assembler;
use pdl_core::frontend::SpecModel;

pub const BASE: u128 = 0x8000_0000;
pub const STOP: u128 = 0xe000_0000;
pub const EXIT: &str = "lui x31, 0xe0000\njalr x0, 0(x31)\n";
pub const MODELS: [&str; 5] = ["p1", "p2", "p3", "p5", "p5_fw"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Corpus programs as (file stem, source), sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "s"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn assemble(m: &SpecModel, src: &str) -> Vec<u8> {
    Assembler::new(m)
        .unwrap()
        .assemble_program(src, BASE as u64)
        .unwrap_or_else(|e| panic!("{e:?}"))
        .bytes()
}

use oracle::{OState, OWrite, OracleMem};
use pdl_core::frontend::model::Resource;
use pdl_core::iss::{Isa, Iss, Write};
use pdl_core::value::Value;
use rand::Rng;

fn as_triples(ws: &[OWrite]) -> Vec<(Resource, u128, u128)> {
    let mut v: Vec<_> = ws
        .iter()
        .map(|w| match *w {
            OWrite::Pc(x) => (Resource::Pc, 0, x),
            OWrite::Reg(r, x) => (Resource::Reg(r), 0, x),
            OWrite::File(f, i, x) => (Resource::File(f), i, x),
            OWrite::Mem { mem, addr, value, .. } => (Resource::Mem(mem), addr, value),
        })
        .collect();
    v.sort();
    v
}

fn iss_triples(ws: &[Write]) -> Vec<(Resource, u128, u128)> {
    let mut v: Vec<_> = ws.iter().map(|w| (w.res, w.index, w.value.bits())).collect();
    v.sort();
    v
}

/// A random word that decodes as `instr`.
pub fn random_word(isa: &Isa<'_>, instr: usize, rng: &mut impl Rng) -> u128 {
    let m = isa.model;
    let fmt = m.format_of(instr);
    loop {
        let mut w: u128 = rng.gen::<u128>() & ((1u128 << fmt.width) - 1);
        for (f, v) in &m.instructions[instr].encoding {
            let field = &fmt.fields[*f];
            w &= !field.deposit((1u128 << field.width) - 1);
            w |= field.deposit(v.bits());
        }
        if isa.decode(w).map(|d| d.instr) == Some(instr) {
            return w;
        }
    }
}

/// Executes `instr` from a random register, PC and memory state on both the
/// simulator and the reference interpreter.
pub fn random_state_agrees(isa: &Isa<'_>, instr: usize, rng: &mut impl Rng) -> Result<(), String> {
    let m = isa.model;
    let word = random_word(isa, instr, rng);
    let pc = (rng.gen::<u32>() as u128) & !(isa.word_bytes() - 1);
    let mut iss = Iss::new(isa, true);
    iss.state.mems[0].fill = rng.gen::<u64>() | 1;
    iss.state.mems[0].write(pc, isa.word_units, Value::new(word, m.word_width()));
    let mut ost = OState::new(m);
    ost.pc = pc;
    for (f, file) in m.files.iter().enumerate() {
        for i in 0..(1u128 << file.index_width) {
            if file.hardwired.contains_key(&i) {
                continue;
            }
            let v: u128 = rng.gen::<u128>() & ((1u128 << file.elem_width) - 1);
            iss.state.files[f][i as usize] = Value::new(v, file.elem_width);
            ost.files[f][i as usize] = v;
        }
    }
    iss.state.pc = Value::new(pc, iss.state.pc.width());
    let snapshot = iss.state.mems[0].clone();
    let base = move |a: u128| snapshot.unit(a as u64);
    let mut omem = OracleMem { written: Default::default(), base: &base };

    let rec = iss.step().map_err(|e| format!("simulator: {e}"))?;
    let (oword, ow) = oracle::step(m, &mut ost, &mut omem).ok_or("oracle cannot identify the word")?;
    let name = &m.instructions[instr].name;
    if oword != word {
        return Err(format!("{name}: fetched {oword:#x}, placed {word:#x}"));
    }
    if iss_triples(&rec.writes) != as_triples(&ow) {
        return Err(format!("{name} {word:#010x} at {pc:#x}: simulator {:?} oracle {:?}", rec.writes, ow));
    }
    if iss.state.pc.bits() != ost.pc {
        return Err(format!("{name} {word:#010x}: next pc {:#x} vs {:#x}", iss.state.pc.bits(), ost.pc));
    }
    Ok(())
}

/// Runs a program on the simulator and the reference interpreter in lockstep.
/// Returns the number of instructions executed.
pub fn program_agrees(isa: &Isa<'_>, image: &[u8]) -> Result<usize, String> {
    let m = isa.model;
    let mut iss = Iss::new(isa, true);
    iss.load_program(image, BASE).unwrap();
    iss.state.pc = Value::new(BASE, 32);
    let init = iss.state.mems[0].clone();
    let base = move |a: u128| init.unit(a as u64);
    let mut omem = OracleMem { written: Default::default(), base: &base };
    let mut ost = OState::new(m);
    ost.pc = BASE;
    let mut n = 0;
    while iss.state.pc.bits() != STOP {
        if n > 100_000 {
            return Err("no stop".into());
        }
        let rec = iss.step().map_err(|e| format!("step {n}: {e}"))?;
        let (_, ow) = oracle::step(m, &mut ost, &mut omem).ok_or(format!("step {n}: oracle cannot identify"))?;
        if iss_triples(&rec.writes) != as_triples(&ow) || iss.state.pc.bits() != ost.pc {
            return Err(format!("step {n} at {:#x}: simulator {:?} oracle {:?}", rec.pc.bits(), rec.writes, ow));
        }
        n += 1;
    }
    Ok(n)
}

/// Renders the full simulator trace of a program.
pub fn iss_trace(isa: &Isa<'_>, image: &[u8], cached: bool) -> Vec<String> {
    let mut iss = Iss::new(isa, cached);
    iss.load_program(image, BASE).unwrap();
    iss.state.pc = Value::new(BASE, 32);
    let mut out = Vec::new();
    let r = iss.run(Some(STOP), 1_000_000, &mut |t| out.push(t.render(isa.model)));
    assert!(r.error.is_none(), "{:?}", r.error);
    out
}

/// A machine state with random registers and memory contents.
pub fn random_state(isa: &Isa<'_>, rng: &mut impl Rng) -> pdl_core::iss::MachineState {
    let m = isa.model;
    let mut st = pdl_core::iss::MachineState::new(m);
    for (f, file) in m.files.iter().enumerate() {
        for i in 0..(1u128 << file.index_width) {
            if !file.hardwired.contains_key(&i) {
                st.files[f][i as usize] = Value::new(rng.gen::<u128>(), file.elem_width);
            }
        }
    }
    st.mems[0].fill = rng.gen::<u64>() | 1;
    let pc = (rng.gen::<u32>() as u128) & !(isa.word_bytes() - 1);
    st.pc = Value::new(pc, st.pc.width());
    st
}
