//! Reads emitted selection patterns back from text and interprets them, to
//! check them against the simulator.

use std::collections::BTreeMap;

use super::random_word;
use pdl_core::iss::{Isa, Iss};
use pdl_core::value::Value;
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pat {
    Reg(String, String),
    Imm(String),
    Const(u128),
    Pc,
    Op(String, Vec<Pat>),
}

struct Parser<'a> {
    s: &'a str,
}

impl Parser<'_> {
    fn ws(&mut self) {
        self.s = self.s.trim_start();
    }

    fn eat(&mut self, t: &str) -> bool {
        self.ws();
        match self.s.strip_prefix(t) {
            Some(r) => {
                self.s = r;
                true
            }
            None => false,
        }
    }

    fn word(&mut self) -> String {
        self.ws();
        let end = self
            .s
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '<' || c == '>' || c == ','))
            .unwrap_or(self.s.len());
        // `<a,b>` belongs to the operator, a bare `,` separates arguments
        let end = match self.s[..end].find('<') {
            Some(_) => self.s[..end].find('>').map(|i| i + 1).unwrap_or(end),
            None => self.s[..end].find(',').unwrap_or(end),
        };
        let (w, r) = self.s.split_at(end);
        self.s = r;
        w.to_string()
    }

    fn pat(&mut self) -> Result<Pat, String> {
        if self.eat("imm:$") {
            return Ok(Pat::Imm(self.word()));
        }
        if self.eat("imm ") {
            let w = self.word();
            let v = match w.strip_prefix("0x") {
                Some(h) => u128::from_str_radix(h, 16),
                None => w.parse(),
            };
            return v.map(Pat::Const).map_err(|e| format!("{w}: {e}"));
        }
        let w = self.word();
        if w.is_empty() {
            return Err(format!("expected a pattern at `{}`", self.s));
        }
        if self.eat(":$") {
            return Ok(Pat::Reg(w, self.word()));
        }
        if w == "pc" {
            return Ok(Pat::Pc);
        }
        if !self.eat("(") {
            return Err(format!("expected `(` after {w}"));
        }
        let mut args = vec![self.pat()?];
        while self.eat(",") {
            args.push(self.pat()?);
        }
        if !self.eat(")") {
            return Err(format!("expected `)` at `{}`", self.s));
        }
        Ok(Pat::Op(w, args))
    }
}

pub fn parse(text: &str) -> Result<Pat, String> {
    let mut p = Parser { s: text };
    let t = p.pat()?;
    p.ws();
    if p.s.is_empty() {
        Ok(t)
    } else {
        Err(format!("trailing `{}`", p.s))
    }
}

/// Emitted lines as instruction name to pattern text.
pub fn lines(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(|l| {
            let (n, p) = l.split_once(": ").expect("NAME: pattern");
            (n.to_string(), p.to_string())
        })
        .collect()
}

/// Values the pattern leaves are bound to.
pub struct Bindings<'a> {
    pub isa: &'a Isa<'a>,
    pub instr: usize,
    pub fields: Vec<Value>,
    pub access: Vec<Value>,
    pub pc: u128,
    pub regs: &'a dyn Fn(&str, u128) -> u128,
    pub mem: &'a dyn Fn(u128) -> u8,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    SetReg(String, u128, u128),
    Store(u32, u128, u128),
    Branch(Option<u128>),
}

fn mask(w: u32) -> u128 {
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}

fn sext(v: u128, from: u32) -> i128 {
    let sh = 128 - from;
    ((v << sh) as i128) >> sh
}

fn width_arg(op: &str) -> Option<u32> {
    op.split_once('<')?.1.strip_suffix('>')?.parse().ok()
}

impl Bindings<'_> {
    fn leaf_field(&self, name: &str) -> Value {
        let fmt = self.isa.model.format_of(self.instr);
        if let Some(i) = fmt.fields.iter().position(|f| f.name == name) {
            return self.fields[i];
        }
        let i = fmt.access.iter().position(|a| a.name == name).unwrap_or_else(|| panic!("unknown leaf {name}"));
        self.access[i]
    }

    /// Value and width of a value-producing pattern.
    pub fn eval(&self, p: &Pat) -> (u128, u32) {
        let m = self.isa.model;
        match p {
            Pat::Reg(file, field) => {
                let f = m.files.iter().find(|f| &f.name == file).unwrap();
                let idx = self.leaf_field(field).bits();
                ((self.regs)(file, idx), f.elem_width)
            }
            Pat::Imm(n) => {
                let v = self.leaf_field(n);
                (v.bits(), v.width())
            }
            Pat::Const(c) => (*c, 128),
            Pat::Pc => (self.pc, m.pc.as_ref().unwrap().width),
            Pat::Op(op, args) => {
                let vs: Vec<(u128, u32)> = args.iter().map(|a| self.eval(a)).collect();
                let base = op.split('<').next().unwrap();
                // constants take the width of their sibling; a shift amount
                // keeps its own width
                let shift = matches!(base, "shl" | "srl" | "sra");
                let w = if shift { vs[0].1 } else { vs.iter().map(|v| v.1).min().unwrap_or(128) };
                let a = vs[0].0 & mask(w);
                let b = match vs.get(1) {
                    Some(&(v, vw)) if shift => v & mask(vw),
                    Some(&(v, _)) => v & mask(w),
                    None => 0,
                };
                let (sa, sb) = (sext(a, w), sext(b, w));
                match base {
                    "add" => (a.wrapping_add(b) & mask(w), w),
                    "sub" => (a.wrapping_sub(b) & mask(w), w),
                    "xor" => (a ^ b, w),
                    "or" => (a | b, w),
                    "and" => (a & b, w),
                    "shl" => ((a << (b % w as u128)) & mask(w), w),
                    "srl" => (a >> (b % w as u128), w),
                    "sra" => ((sa >> (b % w as u128)) as u128 & mask(w), w),
                    "seteq" => ((a == b) as u128, 1),
                    "setne" => ((a != b) as u128, 1),
                    "setlt" => ((sa < sb) as u128, 1),
                    "setle" => ((sa <= sb) as u128, 1),
                    "setult" => ((a < b) as u128, 1),
                    "setule" => ((a <= b) as u128, 1),
                    "zext" => (vs[0].0 & mask(vs[0].1), width_arg(op).unwrap()),
                    "sext" => {
                        let to = width_arg(op).unwrap();
                        (sext(vs[0].0, vs[0].1) as u128 & mask(to), to)
                    }
                    "trunc" => {
                        let to = width_arg(op).unwrap();
                        (vs[0].0 & mask(to), to)
                    }
                    "load" => {
                        let n = width_arg(op).unwrap();
                        (self.load(vs[0].0, n), 8 * n)
                    }
                    other => panic!("operator {other} has no interpretation"),
                }
            }
        }
    }

    fn load(&self, addr: u128, n: u32) -> u128 {
        (0..n).rev().fold(0u128, |acc, i| (acc << 8) | (self.mem)((addr + i as u128) & 0xffff_ffff) as u128)
    }

    pub fn outcome(&self, p: &Pat) -> Outcome {
        let Pat::Op(op, args) = p else { panic!("root must be an operator") };
        match op.split('<').next().unwrap() {
            "set" => {
                let Pat::Reg(file, field) = &args[0] else { panic!("set target") };
                let (v, _) = self.eval(&args[1]);
                Outcome::SetReg(file.clone(), self.leaf_field(field).bits(), v & 0xffff_ffff)
            }
            "store" => {
                let n = width_arg(op).unwrap();
                let (v, _) = self.eval(&args[0]);
                let (a, _) = self.eval(&args[1]);
                Outcome::Store(n, a & 0xffff_ffff, v & mask(8 * n))
            }
            "brcond" => {
                let (c, _) = self.eval(&args[0]);
                let (t, _) = self.eval(&args[1]);
                Outcome::Branch((c & 1 == 1).then_some(t & 0xffff_ffff))
            }
            other => panic!("root {other}"),
        }
    }
}

/// Runs one instruction from a random state on the simulator and compares its
/// effect with the pattern's.
pub fn pattern_agrees(isa: &Isa<'_>, instr: usize, pat: &Pat, rng: &mut impl Rng) -> Result<(), String> {
    let m = isa.model;
    let word = random_word(isa, instr, rng);
    let d = isa.decode(word).unwrap();
    let pc = (rng.gen::<u32>() as u128) & !3;
    let mut iss = Iss::new(isa, false);
    iss.state.mems[0].fill = rng.gen::<u64>() | 1;
    iss.state.mems[0].write(pc, isa.word_units, Value::new(word, 32));
    for i in 1..32 {
        iss.state.files[0][i] = Value::new(rng.gen::<u32>() as u128, 32);
    }
    // keep some addresses close to the instruction so stores can hit it
    if rng.gen_bool(0.1) {
        let r = rng.gen_range(1..32);
        iss.state.files[0][r] = Value::new(pc, 32);
    }
    iss.state.pc = Value::new(pc, 32);
    let before = iss.state.clone();
    let regs = |file: &str, i: u128| -> u128 {
        let f = m.files.iter().position(|x| x.name == file).unwrap();
        before.files[f][i as usize].bits()
    };
    let mem = |a: u128| before.mems[0].unit(a as u64) as u8;
    let b = Bindings {
        isa,
        instr,
        fields: d.fields.clone(),
        access: d.access.clone(),
        pc: isa.pc_view(Value::new(pc, 32)).bits(),
        regs: &regs,
        mem: &mem,
    };
    let expect = b.outcome(pat);
    let rec = iss.step().map_err(|e| e.to_string())?;
    let name = &m.instructions[instr].name;
    let ok = match &expect {
        Outcome::SetReg(file, idx, v) => {
            let f = m.files.iter().position(|x| &x.name == file).unwrap();
            let hard = m.files[f].hardwired.contains_key(idx);
            let wrote = rec.writes.iter().filter(|w| w.res == pdl_core::frontend::model::Resource::File(f)).count();
            iss.state.files[f][*idx as usize].bits() == if hard { before.files[f][*idx as usize].bits() } else { *v }
                && wrote <= 1
                && iss.state.pc.bits() == pc + 4
        }
        Outcome::Store(n, a, v) => {
            let got = (0..*n).rev().fold(0u128, |acc, i| (acc << 8) | iss.state.mems[0].unit(((a + i as u128) & 0xffff_ffff) as u64));
            got == *v && iss.state.pc.bits() == pc + 4
        }
        Outcome::Branch(t) => iss.state.pc.bits() == t.unwrap_or(pc + 4),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{name} {word:#010x} at {pc:#x}: pattern says {expect:?}, simulator wrote {:?} and moved to {:#x}", rec.writes, iss.state.pc.bits()))
    }
}
