use super::grammar::{Element, GrammarRule, OperandKind};
use super::{AsmError, Assembler, OperandInfo, OperandSet};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i128),
    Punct(char),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    /// Character offset in the line.
    pub pos: usize,
}

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '.'
}

fn ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

/// Splits a line into identifiers, integers and single punctuation
/// characters. Whitespace only separates.
pub fn tokenize(s: &str) -> Vec<Token> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if ident_start(c) {
            while i < cs.len() && ident_char(cs[i]) {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(cs[start..i].iter().collect()),
                pos: start,
            });
            continue;
        }
        let neg = c == '-' && cs.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || neg {
            if neg {
                i += 1;
            }
            let hex = cs[i] == '0' && matches!(cs.get(i + 1), Some('x' | 'X'));
            if hex {
                i += 2;
            }
            let ds = i;
            while i < cs.len() && (cs[i] == '_' || cs[i].is_ascii_digit() || (hex && cs[i].is_ascii_hexdigit())) {
                i += 1;
            }
            let digits: String = cs[ds..i].iter().filter(|&&d| d != '_').collect();
            let mag = u128::from_str_radix(&digits, if hex { 16 } else { 10 }).ok();
            match mag.and_then(|m| i128::try_from(m).ok()) {
                Some(m) if !digits.is_empty() => {
                    out.push(Token {
                        tok: Tok::Int(if neg { -m } else { m }),
                        pos: start,
                    });
                }
                _ => {
                    // Malformed number; keep the characters as punctuation so the
                    // parser reports the position.
                    out.push(Token {
                        tok: Tok::Punct(c),
                        pos: start,
                    });
                    i = start + 1;
                }
            }
            continue;
        }
        out.push(Token {
            tok: Tok::Punct(c),
            pos: start,
        });
        i += 1;
    }
    out
}

fn show(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Punct(c) => format!("`{c}`"),
    }
}

enum Fail {
    Parse(usize, Vec<String>),
    Hard(usize, AsmError),
}

impl Fail {
    fn pos(&self) -> usize {
        match self {
            Fail::Parse(p, _) | Fail::Hard(p, _) => *p,
        }
    }
}

fn assign(ops: &mut OperandSet, info: &OperandInfo, v: i128, pos: usize) -> Result<(), Fail> {
    match ops.get(&info.name) {
        Some(&old) if old != v => Err(Fail::Parse(pos, vec![format!("{} = {old}", info.name)])),
        _ => {
            ops.insert(info.name.clone(), v);
            Ok(())
        }
    }
}

fn match_rule(asm: &Assembler, rule: &GrammarRule, toks: &[Token], end: usize) -> Result<OperandSet, Fail> {
    let mut ops = OperandSet::new();
    let mut i = 0;
    let pos = |i: usize| toks.get(i).map(|t| t.pos).unwrap_or(end);
    for e in &rule.elements {
        match e {
            Element::Literal(s) => {
                for lt in super::tokenize(s) {
                    if toks.get(i).map(|t| &t.tok) != Some(&lt.tok) {
                        return Err(Fail::Parse(pos(i), vec![show(&lt.tok)]));
                    }
                    i += 1;
                }
            }
            Element::Operand { info, kind, prefix } => {
                let t = toks.get(i).map(|t| &t.tok);
                let v = match (kind, t) {
                    (OperandKind::Register(f), Some(Tok::Ident(id))) => {
                        let idx = id
                            .strip_prefix(prefix.as_str())
                            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                            .and_then(|d| d.parse::<i128>().ok())
                            .ok_or_else(|| Fail::Parse(pos(i), vec![format!("{prefix} register")]))?;
                        let size = asm.model.files[*f].size() as i128;
                        if idx >= size {
                            return Err(Fail::Hard(
                                pos(i),
                                AsmError::OperandRange {
                                    operand: info.name.clone(),
                                    value: idx,
                                    min: 0,
                                    max: size - 1,
                                },
                            ));
                        }
                        idx
                    }
                    (OperandKind::Register(_), _) => {
                        return Err(Fail::Parse(pos(i), vec![format!("{prefix} register")]))
                    }
                    (OperandKind::Decimal | OperandKind::Hex, Some(Tok::Int(v))) => {
                        let mut v = *v;
                        // Hex spellings of signed operands are bit patterns.
                        if info.signed && v > info.max() && v <= (info.max() << 1) + 1 {
                            v = info.logical(Value::new(v as u128, info.width));
                        }
                        info.check(v).map_err(|e| Fail::Hard(pos(i), e))?;
                        v
                    }
                    _ => return Err(Fail::Parse(pos(i), vec!["integer".into()])),
                };
                assign(&mut ops, info, v, pos(i))?;
                i += 1;
            }
            Element::Enum { operands, table } => {
                let hit = table.iter().find_map(|(text, vals)| {
                    let ts = super::tokenize(text);
                    let ok = ts.len() <= toks.len() - i && ts.iter().zip(&toks[i..]).all(|(a, b)| a.tok == b.tok);
                    ok.then_some((ts.len(), vals))
                });
                let (n, vals) = hit.ok_or_else(|| {
                    let exp = table.iter().filter_map(|(t, _)| super::tokenize(t).first().map(|t| show(&t.tok)));
                    let mut exp: Vec<String> = exp.collect();
                    exp.sort();
                    exp.dedup();
                    Fail::Parse(pos(i), exp)
                })?;
                for (info, &v) in operands.iter().zip(vals) {
                    assign(&mut ops, info, v, pos(i))?;
                }
                i += n;
            }
        }
    }
    if i < toks.len() {
        return Err(Fail::Parse(pos(i), vec!["end of line".into()]));
    }
    Ok(ops)
}

pub(super) fn parse_line(asm: &Assembler, line: &str) -> Result<(usize, OperandSet), AsmError> {
    let toks = tokenize(line);
    let end = line.chars().count();
    let first = match toks.first() {
        Some(Token { tok: Tok::Ident(s), .. }) => s.clone(),
        Some(t) => {
            return Err(AsmError::Parse {
                pos: t.pos,
                expected: vec!["mnemonic".into()],
            })
        }
        None => {
            return Err(AsmError::Parse {
                pos: 0,
                expected: vec!["mnemonic".into()],
            })
        }
    };
    let keyed = asm.by_mnemonic.get(&first).map(|v| v.as_slice()).unwrap_or(&[]);
    if keyed.is_empty() && asm.unkeyed.is_empty() {
        return Err(AsmError::NoMatchingInstruction(first));
    }
    let mut best: Option<Fail> = None;
    for &r in keyed.iter().chain(&asm.unkeyed) {
        let rule = &asm.rules[r];
        match match_rule(asm, rule, &toks, end) {
            Ok(ops) => return Ok((rule.instr, ops)),
            Err(f) => {
                let better = match &best {
                    None => true,
                    Some(b) => f.pos() > b.pos() || (f.pos() == b.pos() && matches!(f, Fail::Hard(..))),
                };
                if better {
                    best = Some(f);
                }
            }
        }
    }
    match best {
        Some(Fail::Hard(_, e)) => Err(e),
        Some(Fail::Parse(pos, expected)) => {
            if keyed.is_empty() && pos == toks[0].pos {
                Err(AsmError::NoMatchingInstruction(first))
            } else {
                Err(AsmError::Parse { pos, expected })
            }
        }
        None => Err(AsmError::NoMatchingInstruction(first)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_classes() {
        let t: Vec<Tok> = tokenize("lw x1, -0x10(x2) # c").into_iter().map(|t| t.tok).collect();
        assert_eq!(
            t,
            vec![
                Tok::Ident("lw".into()),
                Tok::Ident("x1".into()),
                Tok::Punct(','),
                Tok::Int(-16),
                Tok::Punct('('),
                Tok::Ident("x2".into()),
                Tok::Punct(')'),
                Tok::Punct('#'),
                Tok::Ident("c".into()),
            ]
        );
        assert_eq!(tokenize("  a 12").iter().map(|t| t.pos).collect::<Vec<_>>(), vec![2, 4]);
    }
}
