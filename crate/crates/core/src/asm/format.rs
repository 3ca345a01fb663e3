use super::{AsmError, OperandInfo, OperandSet};
use crate::frontend::eval::{eval, Leaves};
use crate::frontend::model::{AsmExpr, Format, Operand, SpecModel};
use crate::value::Value;

pub fn format_asm(model: &SpecModel, instr: usize, ops: &OperandSet) -> Result<String, AsmError> {
    let mut out = String::new();
    render(model, instr, &model.instructions[instr].assembly, ops, &mut out)?;
    Ok(out)
}

pub(super) fn operand_value(fmt: &Format, op: Operand, ops: &OperandSet) -> Result<(OperandInfo, i128), AsmError> {
    let info = OperandInfo::new(fmt, op);
    let v = *ops.get(&info.name).ok_or_else(|| AsmError::MissingOperand(info.name.clone()))?;
    Ok((info, v))
}

pub(super) fn hex_text(info: &OperandInfo, v: i128) -> String {
    format!("0x{:x}", info.to_value(v).bits())
}

struct OpLeaves<'a> {
    fmt: &'a Format,
    ops: &'a OperandSet,
    missing: Option<String>,
}

impl OpLeaves<'_> {
    fn get(&mut self, op: Operand) -> Option<Value> {
        match operand_value(self.fmt, op, self.ops) {
            Ok((info, v)) => Some(info.to_value(v)),
            Err(_) => {
                self.missing = Some(OperandInfo::new(self.fmt, op).name);
                None
            }
        }
    }
}

impl Leaves for OpLeaves<'_> {
    fn field(&mut self, i: usize) -> Option<Value> {
        self.get(Operand::Field(i))
    }
    fn access(&mut self, i: usize) -> Option<Value> {
        self.get(Operand::Access(i))
    }
}

pub(super) fn render(
    model: &SpecModel,
    instr: usize,
    e: &AsmExpr,
    ops: &OperandSet,
    out: &mut String,
) -> Result<(), AsmError> {
    let fmt = model.format_of(instr);
    match e {
        AsmExpr::Lit(s) => out.push_str(s),
        AsmExpr::Mnemonic => out.push_str(&model.instructions[instr].name.to_lowercase()),
        AsmExpr::Register { file, operand } => {
            let (_, v) = operand_value(fmt, *operand, ops)?;
            out.push_str(&format!("{}{}", model.files[*file].prefix(), v));
        }
        AsmExpr::Decimal(op) => {
            let (_, v) = operand_value(fmt, *op, ops)?;
            out.push_str(&v.to_string());
        }
        AsmExpr::Hex(op) => {
            let (info, v) = operand_value(fmt, *op, ops)?;
            out.push_str(&hex_text(&info, v));
        }
        AsmExpr::Concat(xs) => {
            for x in xs {
                render(model, instr, x, ops, out)?;
            }
        }
        AsmExpr::If(c, a, b) => {
            let mut lv = OpLeaves { fmt, ops, missing: None };
            let cv = eval(c, &mut lv, &mut Vec::new());
            let cv = cv.ok_or_else(|| AsmError::MissingOperand(lv.missing.unwrap_or_default()))?;
            render(model, instr, if cv.is_true() { a } else { b }, ops, out)?;
        }
        AsmExpr::Match(s, arms, d) => {
            let mut lv = OpLeaves { fmt, ops, missing: None };
            let sv = eval(s, &mut lv, &mut Vec::new());
            let sv = sv.ok_or_else(|| AsmError::MissingOperand(lv.missing.unwrap_or_default()))?;
            let body = arms
                .iter()
                .find(|(pats, _)| pats.iter().any(|p| p.bits() == sv.bits()))
                .map(|(_, b)| b)
                .unwrap_or(d);
            render(model, instr, body, ops, out)?;
        }
    }
    Ok(())
}
