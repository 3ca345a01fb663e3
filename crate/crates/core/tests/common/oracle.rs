//! Reference interpreter over the typed instruction semantics. Arithmetic is
//! done on unbounded integers and reduced to the result width afterwards, so it
//! shares no evaluation code with the graph-based simulator.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

use pdl_core::frontend::model::{CastKind, Endian, Op, PcSemantics, SpecModel, TExpr, TExprKind, TStmt, TStmtKind};

#[derive(Clone, Debug)]
struct V {
    v: BigUint,
    w: u32,
}

fn modulus(w: u32) -> BigInt {
    BigInt::one() << w
}

fn wrap(x: BigInt, w: u32) -> V {
    let m = modulus(w);
    let r = ((x % &m) + &m) % &m;
    V { v: r.to_biguint().unwrap(), w }
}

fn unsigned(a: &V) -> BigInt {
    BigInt::from_biguint(Sign::Plus, a.v.clone())
}

fn signed(a: &V) -> BigInt {
    let u = unsigned(a);
    if a.w > 0 && a.v.bit(a.w as u64 - 1) {
        u - modulus(a.w)
    } else {
        u
    }
}

fn truth(b: bool) -> V {
    V { v: if b { BigUint::one() } else { BigUint::zero() }, w: 1 }
}

fn small(a: &V) -> u128 {
    a.v.to_u128().expect("value fits in 128 bits")
}

/// Register and PC state; memory lives in `OracleMem`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OState {
    pub pc: u128,
    pub files: Vec<Vec<u128>>,
    pub regs: Vec<u128>,
}

impl OState {
    pub fn new(m: &SpecModel) -> Self {
        OState {
            pc: 0,
            files: m
                .files
                .iter()
                .map(|f| {
                    let mut v = vec![0u128; 1usize << f.index_width];
                    for (&i, c) in &f.hardwired {
                        v[i as usize] = c.bits();
                    }
                    v
                })
                .collect(),
            regs: vec![0; m.registers.len()],
        }
    }
}

/// Byte-addressed memory: written units, falling back to `base` for the rest.
pub struct OracleMem<'a> {
    pub written: HashMap<u128, u128>,
    pub base: &'a dyn Fn(u128) -> u128,
}

impl OracleMem<'_> {
    fn unit(&self, a: u128) -> u128 {
        self.written.get(&a).copied().unwrap_or_else(|| (self.base)(a))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum OWrite {
    Pc(u128),
    Reg(usize, u128),
    File(usize, u128, u128),
    Mem { mem: usize, addr: u128, units: u32, value: u128 },
}

struct Ctx<'a> {
    m: &'a SpecModel,
    st: &'a OState,
    mem: &'a OracleMem<'a>,
    word: u128,
    format: usize,
    env: HashMap<u32, V>,
}

fn addr_mask(m: &SpecModel, mem: usize) -> u128 {
    let w = m.memories[mem].addr_width;
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}

impl Ctx<'_> {
    fn field(&self, i: usize) -> V {
        extract(&self.m.formats[self.format].fields[i].ranges, self.word)
    }

    fn pc_value(&self) -> u128 {
        let pc = self.m.pc.as_ref().unwrap();
        let step = (self.m.word_width() / 8) as u128;
        let off = match pc.semantics {
            PcSemantics::Current => 0,
            PcSemantics::Next => step,
            PcSemantics::NextNext => 2 * step,
        };
        small(&wrap(BigInt::from(self.st.pc + off), pc.width))
    }

    fn read_mem(&self, mem: usize, units: u32, addr: u128) -> V {
        let md = &self.m.memories[mem];
        let mut acc = BigUint::zero();
        for k in 0..units {
            let off = match md.endian {
                Endian::Little => units - 1 - k,
                Endian::Big => k,
            };
            let a = (addr + off as u128) & addr_mask(self.m, mem);
            acc = (acc << md.unit_width) | BigUint::from(self.mem.unit(a));
        }
        V { v: acc, w: units * md.unit_width }
    }

    fn eval(&mut self, e: &TExpr) -> V {
        let w = e.ty.width().unwrap_or(128);
        match &e.kind {
            TExprKind::Const(c) => wrap(BigInt::from(c.bits()), w),
            TExprKind::Field(i) => self.field(*i),
            TExprKind::Access(i) => {
                let body = self.m.formats[self.format].access[*i].body.clone();
                let saved = std::mem::take(&mut self.env);
                let v = self.eval(&body);
                self.env = saved;
                v
            }
            TExprKind::Var(x) => self.env[x].clone(),
            TExprKind::ReadPc => wrap(BigInt::from(self.pc_value()), w),
            TExprKind::ReadReg(r) => wrap(BigInt::from(self.st.regs[*r]), w),
            TExprKind::ReadFile(f, i) => {
                let idx = small(&self.eval(i)) % self.st.files[*f].len() as u128;
                wrap(BigInt::from(self.st.files[*f][idx as usize]), w)
            }
            TExprKind::ReadMem { mem, units, addr } => {
                let a = small(&self.eval(addr));
                self.read_mem(*mem, *units, a)
            }
            TExprKind::Prim(op, args) => {
                let a: Vec<V> = args.iter().map(|x| self.eval(x)).collect();
                prim(*op, &a, w)
            }
            TExprKind::Cast(k, x) => {
                let a = self.eval(x);
                match k {
                    CastKind::SExt => wrap(signed(&a), w),
                    CastKind::ZExt | CastKind::Trunc => wrap(unsigned(&a), w),
                }
            }
            TExprKind::Slice(x, hi, lo) => {
                let a = self.eval(x);
                wrap(unsigned(&a) >> *lo, hi - lo + 1)
            }
            TExprKind::Concat(parts) => {
                let mut acc = BigInt::zero();
                let mut total = 0;
                for p in parts {
                    let v = self.eval(p);
                    acc = (acc << v.w) | unsigned(&v);
                    total += v.w;
                }
                wrap(acc, total)
            }
            TExprKind::If(c, t, f) => {
                if self.eval(c).v.is_zero() {
                    self.eval(f)
                } else {
                    self.eval(t)
                }
            }
            TExprKind::Match(s, arms, default) => {
                let sv = self.eval(s).v;
                for (vals, body) in arms {
                    if vals.iter().any(|v| BigUint::from(v.bits()) == sv) {
                        return self.eval(body);
                    }
                }
                self.eval(default)
            }
            TExprKind::Let(x, val, body) => {
                let v = self.eval(val);
                let old = self.env.insert(*x, v);
                let r = self.eval(body);
                match old {
                    Some(o) => self.env.insert(*x, o),
                    None => self.env.remove(x),
                };
                r
            }
        }
    }

    fn exec(&mut self, s: &TStmt, out: &mut Vec<OWrite>) {
        match &s.kind {
            TStmtKind::WritePc(e) => {
                let v = self.eval(e);
                let pw = self.m.pc.as_ref().unwrap().width;
                out.push(OWrite::Pc(small(&wrap(unsigned(&v), pw))));
            }
            TStmtKind::WriteReg(r, e) => {
                let v = self.eval(e);
                let rw = self.m.registers[*r].width;
                out.push(OWrite::Reg(*r, small(&wrap(unsigned(&v), rw))));
            }
            TStmtKind::WriteFile(f, i, e) => {
                let fd = &self.m.files[*f];
                let idx = small(&self.eval(i)) & ((1u128 << fd.index_width) - 1);
                let v = self.eval(e);
                if !fd.hardwired.contains_key(&idx) {
                    out.push(OWrite::File(*f, idx, small(&wrap(unsigned(&v), fd.elem_width))));
                }
            }
            TStmtKind::WriteMem { mem, units, addr, value } => {
                let a = small(&self.eval(addr)) & addr_mask(self.m, *mem);
                let v = self.eval(value);
                let w = units * self.m.memories[*mem].unit_width;
                out.push(OWrite::Mem { mem: *mem, addr: a, units: *units, value: small(&wrap(unsigned(&v), w)) });
            }
            TStmtKind::Let(x, val, body) => {
                let v = self.eval(val);
                let old = self.env.insert(*x, v);
                self.exec(body, out);
                match old {
                    Some(o) => self.env.insert(*x, o),
                    None => self.env.remove(x),
                };
            }
            TStmtKind::If(c, t, f) => {
                if !self.eval(c).v.is_zero() {
                    self.exec(t, out);
                } else if let Some(f) = f {
                    self.exec(f, out);
                }
            }
            TStmtKind::Match(sc, arms, default) => {
                let sv = self.eval(sc).v;
                for (vals, body) in arms {
                    if vals.iter().any(|v| BigUint::from(v.bits()) == sv) {
                        return self.exec(body, out);
                    }
                }
                if let Some(d) = default {
                    self.exec(d, out);
                }
            }
            TStmtKind::Block(ss) => {
                for s in ss {
                    self.exec(s, out);
                }
            }
        }
    }
}

fn extract(ranges: &[(u32, u32)], word: u128) -> V {
    let mut acc = BigUint::zero();
    let mut w = 0;
    for &(hi, lo) in ranges {
        let n = hi - lo + 1;
        let part = (word >> lo) & ((1u128 << n) - 1);
        acc = (acc << n) | BigUint::from(part);
        w += n;
    }
    V { v: acc, w }
}

fn shift_amount(a: &V, b: &V) -> usize {
    (b.v.clone() % BigUint::from(a.w)).to_usize().unwrap()
}

fn prim(op: Op, a: &[V], w: u32) -> V {
    let x = &a[0];
    match op {
        Op::Not => wrap(!unsigned(x), w),
        Op::Neg => wrap(-unsigned(x), w),
        _ => {
            let y = &a[1];
            match op {
                Op::Add => wrap(unsigned(x) + unsigned(y), w),
                Op::Sub => wrap(unsigned(x) - unsigned(y), w),
                Op::Mul | Op::MulWideU => wrap(unsigned(x) * unsigned(y), w),
                Op::MulWideS => wrap(signed(x) * signed(y), w),
                Op::And => wrap(unsigned(x) & unsigned(y), w),
                Op::Or => wrap(unsigned(x) | unsigned(y), w),
                Op::Xor => wrap(unsigned(x) ^ unsigned(y), w),
                Op::Shl => wrap(unsigned(x) << shift_amount(x, y), w),
                Op::Lshr => wrap(unsigned(x) >> shift_amount(x, y), w),
                Op::Ashr => wrap(signed(x) >> shift_amount(x, y), w),
                Op::Eq => truth(x.v == y.v),
                Op::Ne => truth(x.v != y.v),
                Op::Ult => truth(x.v < y.v),
                Op::Ule => truth(x.v <= y.v),
                Op::Slt => truth(signed(x) < signed(y)),
                Op::Sle => truth(signed(x) <= signed(y)),
                Op::Not | Op::Neg => unreachable!(),
            }
        }
    }
}

/// The instruction whose encoding constants all match `word`; the one fixing
/// the most bits wins.
pub fn identify(m: &SpecModel, word: u128) -> Option<usize> {
    let mut best: Option<(u32, usize)> = None;
    for (i, ins) in m.instructions.iter().enumerate() {
        let fmt = &m.formats[ins.format];
        let mut bits = 0;
        let ok = ins.encoding.iter().all(|(f, v)| {
            let field = &fmt.fields[*f];
            bits += field.width;
            extract(&field.ranges, word).v == BigUint::from(v.bits())
        });
        if ok && best.is_none_or(|(b, _)| bits > b) {
            best = Some((bits, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Effects of executing `word` (instruction `instr`) in `st`, in statement
/// order. The PC write is implicit when the semantics do not write it.
pub fn step_effects(m: &SpecModel, st: &OState, mem: &OracleMem<'_>, word: u128, instr: usize) -> Vec<OWrite> {
    let mut ctx = Ctx { m, st, mem, word, format: m.instructions[instr].format, env: HashMap::new() };
    let mut out = Vec::new();
    ctx.exec(&m.instructions[instr].behavior, &mut out);
    out
}

/// Applies effects; returns the next PC.
pub fn apply(m: &SpecModel, st: &mut OState, mem: &mut OracleMem<'_>, effects: &[OWrite]) {
    let step = (m.word_width() / 8) as u128;
    let pcw = m.pc.as_ref().unwrap().width;
    let mut next = (st.pc + step) & if pcw >= 128 { u128::MAX } else { (1u128 << pcw) - 1 };
    for e in effects {
        match *e {
            OWrite::Pc(v) => next = v,
            OWrite::Reg(r, v) => st.regs[r] = v,
            OWrite::File(f, i, v) => st.files[f][i as usize] = v,
            OWrite::Mem { mem: mi, addr, units, value } => {
                let md = &m.memories[mi];
                let uw = md.unit_width;
                for k in 0..units {
                    let off = match md.endian {
                        Endian::Little => k,
                        Endian::Big => units - 1 - k,
                    };
                    let a = (addr + off as u128) & addr_mask(m, mi);
                    mem.written.insert(a, (value >> (k * uw)) & ((1u128 << uw) - 1));
                }
            }
        }
    }
    st.pc = next;
}

/// Fetches, identifies and executes one instruction. `None` for words that
/// match no encoding.
pub fn step(m: &SpecModel, st: &mut OState, mem: &mut OracleMem<'_>) -> Option<(u128, Vec<OWrite>)> {
    let units = m.word_width() / m.memories[0].unit_width;
    let word = {
        let c = Ctx { m, st, mem, word: 0, format: 0, env: HashMap::new() };
        small(&c.read_mem(0, units, st.pc))
    };
    let instr = identify(m, word)?;
    let eff = step_effects(m, st, mem, word, instr);
    apply(m, st, mem, &eff);
    Some((word, eff))
}
