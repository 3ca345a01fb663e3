use std::collections::HashMap;

use super::format::{hex_text, render};
use super::{asm_operands, operands_of, AsmError, OperandInfo, OperandSet};
use crate::frontend::model::{AsmExpr, Operand, SpecModel};

/// Largest input domain enumerated when inverting a conditional.
pub const ENUM_LIMIT: u128 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperandKind {
    Register(usize),
    Decimal,
    Hex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Element {
    Literal(String),
    Operand { info: OperandInfo, kind: OperandKind, prefix: String },
    /// Rendered text for every assignment of `operands`.
    Enum {
        operands: Vec<OperandInfo>,
        table: Vec<(String, Vec<i128>)>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleSource {
    Direct,
    Enumeration,
    Override,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarRule {
    pub instr: usize,
    pub elements: Vec<Element>,
    pub operands: Vec<OperandInfo>,
    pub source: RuleSource,
}

impl GrammarRule {
    /// Leading identifier, normally the mnemonic.
    pub fn key(&self) -> Option<String> {
        match self.elements.first()? {
            Element::Literal(s) => match super::tokenize(s).first()?.tok {
                super::Tok::Ident(ref id) => Some(id.clone()),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn specificity(&self) -> usize {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Literal(s) => s.chars().filter(|c| !c.is_whitespace()).count(),
                _ => 0,
            })
            .sum()
    }

    pub fn render(&self, ops: &OperandSet) -> Result<String, AsmError> {
        let mut out = String::new();
        for e in &self.elements {
            match e {
                Element::Literal(s) => out.push_str(s),
                Element::Operand { info, kind, prefix } => {
                    let v = *ops.get(&info.name).ok_or_else(|| AsmError::MissingOperand(info.name.clone()))?;
                    match kind {
                        OperandKind::Register(_) => out.push_str(&format!("{prefix}{v}")),
                        OperandKind::Decimal => out.push_str(&v.to_string()),
                        OperandKind::Hex => out.push_str(&hex_text(info, v)),
                    }
                }
                Element::Enum { operands, table } => {
                    let key: Result<Vec<i128>, AsmError> = operands
                        .iter()
                        .map(|i| ops.get(&i.name).copied().ok_or_else(|| AsmError::MissingOperand(i.name.clone())))
                        .collect();
                    let key = key?;
                    let (text, _) = table.iter().find(|(_, k)| *k == key).ok_or_else(|| AsmError::OperandRange {
                        operand: operands[0].name.clone(),
                        value: key[0],
                        min: operands[0].min(),
                        max: operands[0].max(),
                    })?;
                    out.push_str(text);
                }
            }
        }
        Ok(out)
    }
}

fn push_lit(out: &mut Vec<Element>, s: &str) {
    if let Some(Element::Literal(prev)) = out.last_mut() {
        prev.push_str(s);
    } else {
        out.push(Element::Literal(s.to_string()));
    }
}

fn describe(ops: &[OperandInfo], vals: &[i128]) -> String {
    ops.iter()
        .zip(vals)
        .map(|(o, v)| format!("{}={}", o.name, v))
        .collect::<Vec<_>>()
        .join(", ")
}

fn enumerate(model: &SpecModel, instr: usize, e: &AsmExpr) -> Result<Element, AsmError> {
    let fmt = model.format_of(instr);
    let mut ops = Vec::new();
    asm_operands(e, &mut ops);
    let infos: Vec<OperandInfo> = ops.iter().map(|&o| OperandInfo::new(fmt, o)).collect();
    let bits: u32 = infos.iter().map(|i| i.width).sum();
    let size = if bits >= 128 { u128::MAX } else { 1u128 << bits };
    if size > ENUM_LIMIT {
        return Err(AsmError::DomainTooLarge {
            instr: model.instructions[instr].name.clone(),
            size,
        });
    }
    let mut seen: HashMap<String, Vec<i128>> = HashMap::new();
    let mut table = Vec::new();
    for n in 0..size {
        let mut rest = n;
        let mut set = OperandSet::new();
        let mut vals = Vec::new();
        for info in &infos {
            let raw = rest & crate::value::mask(info.width);
            rest >>= info.width;
            let v = info.logical(crate::value::Value::new(raw, info.width));
            set.insert(info.name.clone(), v);
            vals.push(v);
        }
        let mut text = String::new();
        render(model, instr, e, &set, &mut text)?;
        if let Some(prev) = seen.get(&text) {
            return Err(AsmError::NonInjective {
                instr: model.instructions[instr].name.clone(),
                a: describe(&infos, prev),
                b: describe(&infos, &vals),
                text,
            });
        }
        seen.insert(text.clone(), vals.clone());
        table.push((text, vals));
    }
    // Longer renderings first so a prefix never shadows a longer match.
    table.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
    Ok(Element::Enum { operands: infos, table })
}

fn invert(
    model: &SpecModel,
    instr: usize,
    e: &AsmExpr,
    out: &mut Vec<Element>,
    source: &mut RuleSource,
) -> Result<(), AsmError> {
    let fmt = model.format_of(instr);
    match e {
        AsmExpr::Lit(s) => push_lit(out, s),
        AsmExpr::Mnemonic => push_lit(out, &model.instructions[instr].name.to_lowercase()),
        AsmExpr::Register { file, operand } => out.push(Element::Operand {
            info: OperandInfo::new(fmt, *operand),
            kind: OperandKind::Register(*file),
            prefix: model.files[*file].prefix(),
        }),
        AsmExpr::Decimal(op) => out.push(Element::Operand {
            info: OperandInfo::new(fmt, *op),
            kind: OperandKind::Decimal,
            prefix: String::new(),
        }),
        AsmExpr::Hex(op) => out.push(Element::Operand {
            info: OperandInfo::new(fmt, *op),
            kind: OperandKind::Hex,
            prefix: String::new(),
        }),
        AsmExpr::Concat(xs) => {
            for x in xs {
                invert(model, instr, x, out, source)?;
            }
        }
        AsmExpr::If(..) | AsmExpr::Match(..) => {
            *source = RuleSource::Enumeration;
            out.push(enumerate(model, instr, e)?);
        }
    }
    Ok(())
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

fn element_name(e: &Element) -> String {
    match e {
        Element::Literal(s) => format!("\"{s}\""),
        Element::Operand { info, .. } => info.name.clone(),
        Element::Enum { operands, .. } => operands.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join("/"),
    }
}

fn check_separable(model: &SpecModel, instr: usize, els: &[Element]) -> Result<(), AsmError> {
    let sep = |s: &str, first: bool| {
        let c = if first { s.chars().next() } else { s.chars().last() };
        c.is_none_or(|c| !is_ident_char(c))
    };
    let mut prev: Option<&Element> = None;
    for e in els {
        let (opens, closes) = match e {
            Element::Literal(s) => {
                if s.chars().any(|c| !is_ident_char(c)) {
                    prev = None;
                }
                continue;
            }
            Element::Operand { .. } => (false, false),
            Element::Enum { table, .. } => (
                table.iter().all(|(t, _)| sep(t, true)),
                table.iter().all(|(t, _)| sep(t, false)),
            ),
        };
        if let Some(p) = prev.filter(|_| !opens) {
            return Err(AsmError::Inseparable {
                instr: model.instructions[instr].name.clone(),
                a: element_name(p),
                b: element_name(e),
            });
        }
        prev = if closes { None } else { Some(e) };
    }
    Ok(())
}

/// Parsing rule obtained by inverting the instruction's assembly syntax.
pub fn infer_grammar(model: &SpecModel, instr: usize) -> Result<GrammarRule, AsmError> {
    let mut elements = Vec::new();
    let mut source = RuleSource::Direct;
    invert(model, instr, &model.instructions[instr].assembly, &mut elements, &mut source)?;
    check_separable(model, instr, &elements)?;
    Ok(GrammarRule {
        instr,
        elements,
        operands: operands_of(model, instr),
        source,
    })
}

fn kind_in(e: &AsmExpr, op: Operand) -> Option<OperandKind> {
    match e {
        AsmExpr::Register { file, operand } if *operand == op => Some(OperandKind::Register(*file)),
        AsmExpr::Hex(o) if *o == op => Some(OperandKind::Hex),
        AsmExpr::Decimal(o) if *o == op => Some(OperandKind::Decimal),
        AsmExpr::Concat(xs) => xs.iter().find_map(|x| kind_in(x, op)),
        AsmExpr::If(_, a, b) => kind_in(a, op).or_else(|| kind_in(b, op)),
        AsmExpr::Match(_, arms, d) => arms.iter().find_map(|(_, x)| kind_in(x, op)).or_else(|| kind_in(d, op)),
        _ => None,
    }
}

/// Rule from a literal template with `{operand}` holes.
pub(super) fn override_rule(model: &SpecModel, instr: usize, template: &str) -> Result<GrammarRule, AsmError> {
    let ins = &model.instructions[instr];
    let fmt = model.format_of(instr);
    let bad = |message: String| AsmError::Override {
        instr: ins.name.clone(),
        message,
    };
    let mut elements = Vec::new();
    let mut operands: Vec<OperandInfo> = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        push_lit(&mut elements, &rest[..open]);
        let close = rest[open..].find('}').ok_or_else(|| bad("unclosed `{`".into()))? + open;
        let name = rest[open + 1..close].trim();
        let op = fmt
            .field_index(name)
            .map(Operand::Field)
            .or_else(|| fmt.access_index(name).map(Operand::Access))
            .ok_or_else(|| bad(format!("format `{}` has no operand `{name}`", fmt.name)))?;
        let info = OperandInfo::new(fmt, op);
        let kind = kind_in(&ins.assembly, op).unwrap_or(OperandKind::Decimal);
        let prefix = match kind {
            OperandKind::Register(f) => model.files[f].prefix(),
            _ => String::new(),
        };
        if !operands.contains(&info) {
            operands.push(info.clone());
        }
        elements.push(Element::Operand { info, kind, prefix });
        rest = &rest[close + 1..];
    }
    push_lit(&mut elements, rest);
    elements.retain(|e| !matches!(e, Element::Literal(s) if s.is_empty()));
    check_separable(model, instr, &elements)?;
    Ok(GrammarRule {
        instr,
        elements,
        operands,
        source: RuleSource::Override,
    })
}
