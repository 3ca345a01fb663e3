//! The elaborated specification: resolved names, typed behavior, folded
//! constants.

use std::collections::BTreeMap;
use std::fmt;

use super::ast::Span;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Bits,
    SInt,
    UInt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    Bool,
    Bits(Kind, u32),
    /// Untyped integer constant, width taken from context.
    Int,
    Str,
}

impl Ty {
    pub fn bits(w: u32) -> Ty {
        Ty::Bits(Kind::Bits, w)
    }

    pub fn width(self) -> Option<u32> {
        match self {
            Ty::Bool => Some(1),
            Ty::Bits(_, w) => Some(w),
            _ => None,
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Ty::Bits(k, _) => k,
            _ => Kind::Bits,
        }
    }

    pub fn is_signed(self) -> bool {
        self.kind() == Kind::SInt
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Bool => write!(f, "Bool"),
            Ty::Bits(Kind::Bits, w) => write!(f, "Bits<{w}>"),
            Ty::Bits(Kind::SInt, w) => write!(f, "SInt<{w}>"),
            Ty::Bits(Kind::UInt, w) => write!(f, "UInt<{w}>"),
            Ty::Int => write!(f, "constant integer"),
            Ty::Str => write!(f, "String"),
        }
    }
}

/// Signedness-resolved operators shared by the typed AST and the IR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Mul,
    MulWideS,
    MulWideU,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Ashr,
    Eq,
    Ne,
    Ult,
    Ule,
    Slt,
    Sle,
    Not,
    Neg,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::MulWideS => "mulws",
            Op::MulWideU => "mulwu",
            Op::And => "and",
            Op::Or => "or",
            Op::Xor => "xor",
            Op::Shl => "shl",
            Op::Lshr => "srl",
            Op::Ashr => "sra",
            Op::Eq => "seteq",
            Op::Ne => "setne",
            Op::Ult => "setult",
            Op::Ule => "setule",
            Op::Slt => "setlt",
            Op::Sle => "setle",
            Op::Not => "not",
            Op::Neg => "neg",
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            Op::Add | Op::Mul | Op::MulWideS | Op::MulWideU | Op::And | Op::Or | Op::Xor | Op::Eq | Op::Ne
        )
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Not | Op::Neg => 1,
            _ => 2,
        }
    }

    pub fn is_compare(self) -> bool {
        matches!(self, Op::Eq | Op::Ne | Op::Ult | Op::Ule | Op::Slt | Op::Sle)
    }

    pub fn apply(self, args: &[Value]) -> Value {
        let a = args[0];
        match self {
            Op::Not => a.not(),
            Op::Neg => a.neg(),
            _ => {
                let b = args[1];
                match self {
                    Op::Add => a.add(b),
                    Op::Sub => a.sub(b),
                    Op::Mul => a.mul(b),
                    Op::MulWideS => a.mul_wide(b, true),
                    Op::MulWideU => a.mul_wide(b, false),
                    Op::And => a.and(b),
                    Op::Or => a.or(b),
                    Op::Xor => a.xor(b),
                    Op::Shl => a.shl(b),
                    Op::Lshr => a.lshr(b),
                    Op::Ashr => a.ashr(b),
                    Op::Eq => a.eq_(b),
                    Op::Ne => a.ne_(b),
                    Op::Ult => a.ult(b),
                    Op::Ule => a.ule(b),
                    Op::Slt => a.slt(b),
                    Op::Sle => a.sle(b),
                    Op::Not | Op::Neg => unreachable!(),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CastKind {
    Trunc,
    ZExt,
    SExt,
}

impl CastKind {
    pub fn apply(self, v: Value, width: u32) -> Value {
        match self {
            CastKind::Trunc => v.trunc(width),
            CastKind::ZExt => v.zext(width),
            CastKind::SExt => v.sext(width),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CastKind::Trunc => "trunc",
            CastKind::ZExt => "zext",
            CastKind::SExt => "sext",
        }
    }
}

/// A typed expression. Let-bound values live in numbered slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TExpr {
    pub kind: TExprKind,
    pub ty: Ty,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TExprKind {
    Const(Value),
    Field(usize),
    Access(usize),
    Var(u32),
    ReadPc,
    ReadReg(usize),
    ReadFile(usize, Box<TExpr>),
    ReadMem {
        mem: usize,
        units: u32,
        addr: Box<TExpr>,
    },
    Prim(Op, Vec<TExpr>),
    Cast(CastKind, Box<TExpr>),
    Slice(Box<TExpr>, u32, u32),
    Concat(Vec<TExpr>),
    If(Box<TExpr>, Box<TExpr>, Box<TExpr>),
    Match(Box<TExpr>, Vec<(Vec<Value>, TExpr)>, Box<TExpr>),
    Let(u32, Box<TExpr>, Box<TExpr>),
}

impl TExpr {
    pub fn constant(v: Value, ty: Ty) -> TExpr {
        TExpr {
            kind: TExprKind::Const(v),
            ty,
        }
    }

    pub fn width(&self) -> u32 {
        self.ty.width().expect("sized expression")
    }

    /// Visits every subexpression, parents first.
    pub fn visit(&self, f: &mut dyn FnMut(&TExpr)) {
        f(self);
        match &self.kind {
            TExprKind::Const(_)
            | TExprKind::Field(_)
            | TExprKind::Access(_)
            | TExprKind::Var(_)
            | TExprKind::ReadPc
            | TExprKind::ReadReg(_) => {}
            TExprKind::ReadFile(_, i) => i.visit(f),
            TExprKind::ReadMem { addr, .. } => addr.visit(f),
            TExprKind::Prim(_, xs) | TExprKind::Concat(xs) => xs.iter().for_each(|x| x.visit(f)),
            TExprKind::Cast(_, x) | TExprKind::Slice(x, _, _) => x.visit(f),
            TExprKind::If(a, b, c) => {
                a.visit(f);
                b.visit(f);
                c.visit(f);
            }
            TExprKind::Match(s, arms, d) => {
                s.visit(f);
                arms.iter().for_each(|(_, x)| x.visit(f));
                d.visit(f);
            }
            TExprKind::Let(_, v, b) => {
                v.visit(f);
                b.visit(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TStmt {
    pub kind: TStmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TStmtKind {
    WritePc(TExpr),
    WriteReg(usize, TExpr),
    WriteFile(usize, TExpr, TExpr),
    WriteMem {
        mem: usize,
        units: u32,
        addr: TExpr,
        value: TExpr,
    },
    Let(u32, TExpr, Box<TStmt>),
    If(TExpr, Box<TStmt>, Option<Box<TStmt>>),
    Match(TExpr, Vec<(Vec<Value>, TStmt)>, Option<Box<TStmt>>),
    Block(Vec<TStmt>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcSemantics {
    Current,
    Next,
    NextNext,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pc {
    pub name: String,
    pub width: u32,
    pub semantics: PcSemantics,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegFile {
    pub name: String,
    pub index_width: u32,
    pub elem_width: u32,
    /// Hardwired index to constant value.
    pub hardwired: BTreeMap<u128, Value>,
}

impl RegFile {
    pub fn size(&self) -> u128 {
        1u128 << self.index_width
    }

    /// Lowercase prefix used by assembly syntax and traces.
    pub fn prefix(&self) -> String {
        self.name.to_lowercase()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub width: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memory {
    pub name: String,
    pub addr_width: u32,
    pub unit_width: u32,
    pub endian: Endian,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    /// (high, low) bit ranges, most significant part first.
    pub ranges: Vec<(u32, u32)>,
    pub width: u32,
}

impl Field {
    pub fn extract(&self, word: u128) -> Value {
        let mut v: u128 = 0;
        for &(hi, lo) in &self.ranges {
            let w = hi - lo + 1;
            v = (v << w) | ((word >> lo) & crate::value::mask(w));
        }
        Value::new(v, self.width)
    }

    /// Places `value` into the word positions of this field.
    pub fn deposit(&self, value: u128) -> u128 {
        let mut word = 0u128;
        let mut rest = self.width;
        for &(hi, lo) in &self.ranges {
            let w = hi - lo + 1;
            rest -= w;
            let part = (value >> rest) & crate::value::mask(w);
            word |= part << lo;
        }
        word
    }

    pub fn mask(&self) -> u128 {
        self.deposit(crate::value::mask(self.width))
    }
}

/// One conjunct of an operand predicate with its human-readable reading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateClause {
    pub expr: TExpr,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inverse {
    /// Body is the field itself or its plain extension.
    Trivial { field: usize, signed: bool },
    /// Predicate and encoding over `Var(0)`, the logical operand value.
    Explicit {
        predicate: Vec<PredicateClause>,
        encoding: Vec<(usize, TExpr)>,
    },
    /// Not invertible; the operand can be printed but not assembled.
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessFn {
    pub name: String,
    pub body: TExpr,
    pub ty: Ty,
    pub inverse: Inverse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Format {
    pub name: String,
    pub width: u32,
    pub fields: Vec<Field>,
    pub access: Vec<AccessFn>,
}

impl Format {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn access_index(&self, name: &str) -> Option<usize> {
        self.access.iter().position(|f| f.name == name)
    }
}

/// A formatting operand: a raw field or an access function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Field(usize),
    Access(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AsmExpr {
    Lit(String),
    Mnemonic,
    Register { file: usize, operand: Operand },
    Decimal(Operand),
    Hex(Operand),
    Concat(Vec<AsmExpr>),
    If(TExpr, Box<AsmExpr>, Box<AsmExpr>),
    Match(TExpr, Vec<(Vec<Value>, AsmExpr)>, Box<AsmExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub name: String,
    pub format: usize,
    pub behavior: TStmt,
    pub encoding: Vec<(usize, Value)>,
    pub assembly: AsmExpr,
    pub tags: Vec<String>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    Pc,
    Reg(usize),
    File(usize),
    Mem(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapOp {
    Read(Resource),
    ReadOrForward(Resource, usize),
    Compute,
    Verify,
    Write(Resource),
    UnknownCheck,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub name: String,
    pub fetch: bool,
    pub decode: bool,
    pub ops: Vec<(MapOp, Span)>,
    /// Stages whose outputs this stage reads.
    pub inputs: Vec<usize>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Logic {
    pub name: String,
    pub forwarding: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiaSpec {
    pub name: String,
    /// In pipeline order.
    pub stages: Vec<Stage>,
    pub logic: Vec<Logic>,
    pub data_bus_width: Option<u32>,
    pub unified_memory: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Processor {
    pub name: String,
    pub start: Option<u128>,
    pub stop_pc: Option<u128>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpecModel {
    pub isa_name: String,
    pub constants: BTreeMap<String, (Value, Ty)>,
    pub aliases: BTreeMap<String, Ty>,
    pub enums: BTreeMap<String, BTreeMap<String, Value>>,
    pub pc: Option<Pc>,
    pub files: Vec<RegFile>,
    pub registers: Vec<Register>,
    pub memories: Vec<Memory>,
    pub formats: Vec<Format>,
    pub instructions: Vec<Instruction>,
    pub mias: Vec<MiaSpec>,
    pub processor: Option<Processor>,
    pub warnings: Vec<String>,
}

impl SpecModel {
    pub fn instruction(&self, name: &str) -> Option<usize> {
        self.instructions.iter().position(|i| i.name == name)
    }

    pub fn format_of(&self, instr: usize) -> &Format {
        &self.formats[self.instructions[instr].format]
    }

    pub fn mia(&self, name: &str) -> Option<&MiaSpec> {
        self.mias.iter().find(|m| m.name == name)
    }

    /// Instruction word width; all formats share it.
    pub fn word_width(&self) -> u32 {
        self.formats.first().map(|f| f.width).unwrap_or(32)
    }

    pub fn resource_name(&self, r: Resource) -> &str {
        match r {
            Resource::Pc => self.pc.as_ref().map(|p| p.name.as_str()).unwrap_or("PC"),
            Resource::Reg(i) => &self.registers[i].name,
            Resource::File(i) => &self.files[i].name,
            Resource::Mem(i) => &self.memories[i].name,
        }
    }
}
