//! Assembler and disassembler derived from the assembly formatting
//! expressions.

mod encode;
mod format;
mod grammar;
mod parse;
mod program;

use std::collections::{BTreeMap, HashMap};

use crate::decode::{build_decode_tree, DecodeError, DecodeTree, EncodingPattern};
use crate::frontend::eval::{eval, Leaves};
use crate::frontend::model::{AsmExpr, Format, Operand, SpecModel, TExpr, TExprKind, Ty};
use crate::value::Value;

pub use format::format_asm;
pub use grammar::{infer_grammar, Element, GrammarRule, OperandKind, RuleSource, ENUM_LIMIT};
pub use parse::{tokenize, Tok, Token};
pub use program::{Listing, ListingLine};

/// Operand name to logical value. Signed operands hold negative values.
pub type OperandSet = BTreeMap<String, i128>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("missing operand `{0}`")]
    MissingOperand(String),
    #[error("`{instr}`: assembly syntax needs {size} evaluations to invert; supply an override")]
    DomainTooLarge { instr: String, size: u128 },
    #[error("`{instr}`: `{a}` and `{b}` both print as \"{text}\"")]
    NonInjective { instr: String, a: String, b: String, text: String },
    #[error("`{instr}`: operands `{a}` and `{b}` are not separated by punctuation")]
    Inseparable { instr: String, a: String, b: String },
    #[error("`{a}` and `{b}` share a mnemonic and have equally specific syntax")]
    RuleTie { a: String, b: String },
    #[error("`{instr}`: operand `{operand}` cannot be assembled")]
    NotInvertible { instr: String, operand: String },
    #[error("bad override for `{instr}`: {message}")]
    Override { instr: String, message: String },
    #[error("column {}: expected {}", .pos + 1, .expected.join(" or "))]
    Parse { pos: usize, expected: Vec<String> },
    #[error("no instruction named `{0}`")]
    NoMatchingInstruction(String),
    #[error("operand `{operand}` = {value} is out of range {min}..={max}")]
    OperandRange { operand: String, value: i128, min: i128, max: i128 },
    #[error("operand `{operand}` = {value} violates its predicate: {description}")]
    PredicateViolation { operand: String, value: i128, description: String },
    #[error("operands disagree on the value of field `{0}`")]
    Inconsistent(String),
    #[error("unknown instruction word {0:#x}")]
    UnknownInstructionWord(u128),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Name, width and signedness of an operand within a format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperandInfo {
    pub operand: Operand,
    pub name: String,
    pub width: u32,
    pub signed: bool,
}

impl OperandInfo {
    pub fn new(fmt: &Format, op: Operand) -> Self {
        match op {
            Operand::Field(i) => OperandInfo {
                operand: op,
                name: fmt.fields[i].name.clone(),
                width: fmt.fields[i].width,
                signed: false,
            },
            Operand::Access(i) => {
                let a = &fmt.access[i];
                OperandInfo {
                    operand: op,
                    name: a.name.clone(),
                    width: a.ty.width().unwrap_or(1),
                    signed: a.ty.is_signed(),
                }
            }
        }
    }

    pub fn min(&self) -> i128 {
        if self.signed {
            -(1i128 << (self.width - 1))
        } else {
            0
        }
    }

    pub fn max(&self) -> i128 {
        if self.signed {
            (1i128 << (self.width - 1)) - 1
        } else if self.width >= 127 {
            i128::MAX
        } else {
            (1i128 << self.width) - 1
        }
    }

    pub fn check(&self, v: i128) -> Result<(), AsmError> {
        if v < self.min() || v > self.max() {
            return Err(AsmError::OperandRange {
                operand: self.name.clone(),
                value: v,
                min: self.min(),
                max: self.max(),
            });
        }
        Ok(())
    }

    /// Logical value of a bit pattern.
    pub fn logical(&self, v: Value) -> i128 {
        let v = Value::new(v.bits(), self.width);
        if self.signed {
            v.to_i128()
        } else {
            v.bits() as i128
        }
    }

    pub fn to_value(&self, v: i128) -> Value {
        Value::from_i128(v, self.width)
    }
}

fn texpr_operands(e: &TExpr, out: &mut Vec<Operand>) {
    e.visit(&mut |x| {
        let op = match x.kind {
            TExprKind::Field(i) => Operand::Field(i),
            TExprKind::Access(i) => Operand::Access(i),
            _ => return,
        };
        if !out.contains(&op) {
            out.push(op);
        }
    });
}

pub(crate) fn asm_operands(e: &AsmExpr, out: &mut Vec<Operand>) {
    let mut add = |op: Operand| {
        if !out.contains(&op) {
            out.push(op);
        }
    };
    match e {
        AsmExpr::Lit(_) | AsmExpr::Mnemonic => {}
        AsmExpr::Register { operand, .. } | AsmExpr::Decimal(operand) | AsmExpr::Hex(operand) => add(*operand),
        AsmExpr::Concat(xs) => xs.iter().for_each(|x| asm_operands(x, out)),
        AsmExpr::If(c, a, b) => {
            texpr_operands(c, out);
            asm_operands(a, out);
            asm_operands(b, out);
        }
        AsmExpr::Match(s, arms, d) => {
            texpr_operands(s, out);
            arms.iter().for_each(|(_, x)| asm_operands(x, out));
            asm_operands(d, out);
        }
    }
}

/// Operands an instruction's assembly syntax mentions, in order of appearance.
pub fn operands_of(model: &SpecModel, instr: usize) -> Vec<OperandInfo> {
    let mut ops = Vec::new();
    asm_operands(&model.instructions[instr].assembly, &mut ops);
    let fmt = model.format_of(instr);
    ops.into_iter().map(|o| OperandInfo::new(fmt, o)).collect()
}

struct FieldLeaves<'a>(&'a [Value]);

impl Leaves for FieldLeaves<'_> {
    fn field(&mut self, i: usize) -> Option<Value> {
        self.0.get(i).copied()
    }
}

/// Value of an access function over decoded fields.
pub fn access_value(fmt: &Format, access: usize, fields: &[Value]) -> Option<Value> {
    let a = &fmt.access[access];
    let v = eval(&a.body, &mut FieldLeaves(fields), &mut Vec::new())?;
    match a.ty {
        Ty::Bits(_, w) => Some(Value::new(v.bits(), w)),
        _ => Some(v),
    }
}

/// The logical operands printed for a decoded instruction.
pub fn operands_from_fields(model: &SpecModel, instr: usize, fields: &[Value]) -> OperandSet {
    operand_values(model.format_of(instr), &operands_of(model, instr), fields)
}

/// Logical values of `operands` over decoded fields.
pub fn operand_values(fmt: &Format, operands: &[OperandInfo], fields: &[Value]) -> OperandSet {
    operands
        .iter()
        .filter_map(|info| {
            let v = match info.operand {
                Operand::Field(i) => fields[i],
                Operand::Access(i) => access_value(fmt, i, fields)?,
            };
            Some((info.name.clone(), info.logical(v)))
        })
        .collect()
}

/// Instruction name to override template with `{operand}` holes.
pub type Overrides = BTreeMap<String, String>;

/// Reads an override table: one `NAME = template` per line, `#` comments.
pub fn parse_overrides(text: &str) -> Result<Overrides, String> {
    let mut out = Overrides::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, tpl) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `NAME = template`", n + 1))?;
        out.insert(name.trim().to_string(), tpl.trim().to_string());
    }
    Ok(out)
}

/// Grammar, decoder and encodings for one instruction set.
pub struct Assembler<'m> {
    pub model: &'m SpecModel,
    pub rules: Vec<GrammarRule>,
    pub tree: DecodeTree,
    patterns: Vec<EncodingPattern>,
    by_mnemonic: HashMap<String, Vec<usize>>,
    unkeyed: Vec<usize>,
}

impl<'m> Assembler<'m> {
    pub fn new(model: &'m SpecModel) -> Result<Self, AsmError> {
        Self::with_overrides(model, &Overrides::new())
    }

    pub fn with_overrides(model: &'m SpecModel, overrides: &Overrides) -> Result<Self, AsmError> {
        let tree = build_decode_tree(model)?;
        let mut patterns = tree.patterns.clone();
        patterns.sort_by_key(|p| p.instr);
        let mut rules = Vec::new();
        for (i, ins) in model.instructions.iter().enumerate() {
            let rule = match overrides.get(&ins.name) {
                Some(t) => grammar::override_rule(model, i, t)?,
                None => infer_grammar(model, i)?,
            };
            rules.push(rule);
        }
        for name in overrides.keys() {
            if model.instruction(name).is_none() {
                return Err(AsmError::Override {
                    instr: name.clone(),
                    message: "no such instruction".into(),
                });
            }
        }
        let mut by_mnemonic: HashMap<String, Vec<usize>> = HashMap::new();
        let mut unkeyed = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            match r.key() {
                Some(k) => by_mnemonic.entry(k).or_default().push(i),
                None => unkeyed.push(i),
            }
        }
        for list in by_mnemonic.values_mut().chain(std::iter::once(&mut unkeyed)) {
            list.sort_by_key(|&i| std::cmp::Reverse(rules[i].specificity()));
            for w in list.windows(2) {
                if rules[w[0]].specificity() == rules[w[1]].specificity() {
                    return Err(AsmError::RuleTie {
                        a: model.instructions[rules[w[0]].instr].name.clone(),
                        b: model.instructions[rules[w[1]].instr].name.clone(),
                    });
                }
            }
        }
        Ok(Assembler {
            model,
            rules,
            tree,
            patterns,
            by_mnemonic,
            unkeyed,
        })
    }

    /// Rules produced without an override.
    pub fn inferred_count(&self) -> usize {
        self.rules.iter().filter(|r| r.source != RuleSource::Override).count()
    }

    /// Text for an instruction; uses the override template when there is one.
    pub fn format(&self, instr: usize, ops: &OperandSet) -> Result<String, AsmError> {
        let rule = &self.rules[instr];
        if rule.source == RuleSource::Override {
            rule.render(ops)
        } else {
            format_asm(self.model, instr, ops)
        }
    }

    pub fn parse(&self, line: &str) -> Result<(usize, OperandSet), AsmError> {
        parse::parse_line(self, line)
    }

    pub fn assemble(&self, instr: usize, ops: &OperandSet) -> Result<u128, AsmError> {
        encode::assemble(self.model, &self.patterns[instr], &self.rules[instr].operands, ops)
    }

    pub fn disassemble(&self, word: u128) -> Result<String, AsmError> {
        let d = self
            .tree
            .decode(self.model, word)
            .ok_or(AsmError::UnknownInstructionWord(word))?;
        let ops = operand_values(self.model.format_of(d.instr), &self.rules[d.instr].operands, &d.fields);
        self.format(d.instr, &ops)
    }

    /// Parses and encodes one statement.
    pub fn assemble_line(&self, line: &str) -> Result<u128, AsmError> {
        let (i, ops) = self.parse(line)?;
        self.assemble(i, &ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::rv32i;

    fn ops(xs: &[(&str, i128)]) -> OperandSet {
        xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn add_round_trip() {
        let m = rv32i();
        let a = Assembler::new(&m).unwrap();
        let add = m.instruction("ADD").unwrap();
        let o = ops(&[("rd", 4), ("rs1", 1), ("rs2", 2)]);
        assert_eq!(format_asm(&m, add, &o).unwrap(), "add x4, x1, x2");
        assert_eq!(a.parse("add x4, x1, x2").unwrap(), (add, o.clone()));
        assert_eq!(a.parse("  add x4 , x1 ,x2 ").unwrap(), (add, o.clone()));
        let w = a.assemble(add, &o).unwrap();
        assert_eq!(w, 0x0020_8233);
        assert_eq!(a.disassemble(w).unwrap(), "add x4, x1, x2");
    }

    #[test]
    fn register_index_out_of_range() {
        let m = rv32i();
        let a = Assembler::new(&m).unwrap();
        assert!(matches!(a.parse("add x99, x1, x2"), Err(AsmError::OperandRange { value: 99, .. })));
    }

    #[test]
    fn odd_branch_offset_violates_predicate() {
        let m = rv32i();
        let a = Assembler::new(&m).unwrap();
        match a.assemble_line("beq x1, x2, 3") {
            Err(AsmError::PredicateViolation { description, value: 3, .. }) => {
                assert_eq!(description, "must be a multiple of 2")
            }
            r => panic!("{r:?}"),
        }
        let w = a.assemble_line("beq x1, x2, 0").unwrap();
        assert_eq!(w & 0xfe00_0f80, 0);
        assert_eq!(a.disassemble(w).unwrap(), "beq x1, x2, 0");
        assert_eq!(a.disassemble(a.assemble_line("beq x1, x2, -4096").unwrap()).unwrap(), "beq x1, x2, -4096");
    }

    #[test]
    fn rendering_builtins() {
        let m = rv32i();
        let lui = m.instruction("LUI").unwrap();
        assert_eq!(format_asm(&m, lui, &ops(&[("rd", 1), ("imm", 255)])).unwrap(), "lui x1, 0xff");
        let addi = m.instruction("ADDI").unwrap();
        assert_eq!(
            format_asm(&m, addi, &ops(&[("rd", 1), ("rs1", 0), ("immS", 0)])).unwrap(),
            "addi x1, x0, 0"
        );
        assert!(matches!(format_asm(&m, addi, &ops(&[("rd", 1)])), Err(AsmError::MissingOperand(_))));
    }

    #[test]
    fn unknown_word() {
        let m = rv32i();
        let a = Assembler::new(&m).unwrap();
        assert_eq!(a.disassemble(0), Err(AsmError::UnknownInstructionWord(0)));
    }

    #[test]
    fn unknown_mnemonic() {
        let m = rv32i();
        let a = Assembler::new(&m).unwrap();
        assert_eq!(a.parse("frob x1"), Err(AsmError::NoMatchingInstruction("frob".into())));
    }

    #[test]
    fn every_rule_is_inferred() {
        let m = rv32i();
        let a = Assembler::new(&m).unwrap();
        assert_eq!(a.inferred_count(), 37);
    }

    #[test]
    fn override_template() {
        let m = rv32i();
        let mut ov = Overrides::new();
        ov.insert("ADD".into(), "add {rd} <- {rs1} + {rs2}".into());
        let a = Assembler::with_overrides(&m, &ov).unwrap();
        let (i, o) = a.parse("add x3 <- x4 + x5").unwrap();
        assert_eq!(a.disassemble(a.assemble(i, &o).unwrap()).unwrap(), "add x3 <- x4 + x5");
        assert_eq!(a.inferred_count(), 36);
    }

    #[test]
    fn override_file_syntax() {
        let o = parse_overrides("# c\nADD = add {rd}\n\n").unwrap();
        assert_eq!(o["ADD"], "add {rd}");
        assert!(parse_overrides("nope").is_err());
    }
}
