use super::{AsmError, OperandInfo, OperandSet};
use crate::decode::EncodingPattern;
use crate::frontend::eval::{eval, NoLeaves};
use crate::frontend::model::{Inverse, Operand, SpecModel};
use crate::value::Value;

/// Packs operands and encoding constants into an instruction word.
pub(super) fn assemble(
    model: &SpecModel,
    pat: &EncodingPattern,
    operands: &[OperandInfo],
    ops: &OperandSet,
) -> Result<u128, AsmError> {
    let ins = &model.instructions[pat.instr];
    let fmt = model.format_of(pat.instr);
    let mut fields: Vec<Option<u128>> = vec![None; fmt.fields.len()];
    let mut set = |f: usize, bits: u128| -> Result<(), AsmError> {
        let bits = bits & crate::value::mask(fmt.fields[f].width);
        match fields[f] {
            Some(old) if old != bits => Err(AsmError::Inconsistent(fmt.fields[f].name.clone())),
            _ => {
                fields[f] = Some(bits);
                Ok(())
            }
        }
    };
    for info in operands {
        let v = *ops.get(&info.name).ok_or_else(|| AsmError::MissingOperand(info.name.clone()))?;
        match info.operand {
            Operand::Field(f) => {
                info.check(v)?;
                set(f, v as u128)?;
            }
            Operand::Access(a) => match &fmt.access[a].inverse {
                Inverse::Trivial { field, signed } => {
                    let raw = OperandInfo {
                        operand: Operand::Field(*field),
                        name: info.name.clone(),
                        width: fmt.fields[*field].width,
                        signed: *signed,
                    };
                    raw.check(v)?;
                    set(*field, raw.to_value(v).bits())?;
                }
                Inverse::Explicit { predicate, encoding } => {
                    info.check(v)?;
                    let mut locals = vec![Some(info.to_value(v))];
                    for clause in predicate {
                        let ok = eval(&clause.expr, &mut NoLeaves, &mut locals).is_some_and(|r| r.is_true());
                        if !ok {
                            return Err(AsmError::PredicateViolation {
                                operand: info.name.clone(),
                                value: v,
                                description: clause.description.clone(),
                            });
                        }
                    }
                    for (f, e) in encoding {
                        let bits = eval(e, &mut NoLeaves, &mut locals).map(Value::bits).ok_or_else(|| {
                            AsmError::NotInvertible {
                                instr: ins.name.clone(),
                                operand: info.name.clone(),
                            }
                        })?;
                        set(*f, bits)?;
                    }
                }
                Inverse::None => {
                    return Err(AsmError::NotInvertible {
                        instr: ins.name.clone(),
                        operand: info.name.clone(),
                    })
                }
            },
        }
    }
    for &(f, v) in &ins.encoding {
        set(f, v.bits())?;
    }
    let mut word = pat.value;
    for (f, bits) in fields.iter().enumerate() {
        if let Some(b) = bits {
            word |= fmt.fields[f].deposit(*b);
        }
    }
    Ok(word)
}
