use super::ast::Span;
use super::error::{Diag, DiagKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `$name`
    Dollar(String),
    Int {
        value: u128,
        radix: super::ast::Radix,
        width: Option<u32>,
    },
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.tok, Tok::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, s: &str) -> bool {
        matches!(&self.tok, Tok::Ident(q) if q == s)
    }

    pub fn describe(&self) -> String {
        match &self.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Dollar(s) => format!("`${s}`"),
            Tok::Int { value, .. } => format!("`{value}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

const PUNCTS: &[&str] = &[
    "..", ":=", "->", "=>", "::", "<<", ">>", "<=", ">=", "!=", "&&", "||", "*#", "(", ")", "{",
    "}", "[", "]", "<", ">", ",", ";", ":", "=", "+", "-", "*", "/", "%", "&", "|", "^", "~", "!",
    ".", "@", "?",
];

pub fn lex(src: &str) -> Result<Vec<Token>, Diag> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(Diag::new(DiagKind::Syntax, span, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let dollar = c == '$';
            if dollar {
                bump!();
            }
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            if word.is_empty() {
                return Err(Diag::new(DiagKind::Syntax, span, "expected name after `$`"));
            }
            toks.push(Token {
                tok: if dollar { Tok::Dollar(word) } else { Tok::Ident(word) },
                span,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let (radix, base) = match (c, chars.get(i + 1)) {
                ('0', Some('x' | 'X')) => (super::ast::Radix::Hex, 16),
                ('0', Some('b' | 'B')) => (super::ast::Radix::Bin, 2),
                _ => (super::ast::Radix::Dec, 10),
            };
            if base != 10 {
                bump!();
                bump!();
            }
            let mut value: u128 = 0;
            let mut digits = 0u32;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '\'') {
                let ch = chars[i];
                if ch == '\'' {
                    bump!();
                    continue;
                }
                let d = ch.to_digit(base).ok_or_else(|| {
                    Diag::new(
                        DiagKind::Syntax,
                        Span { line, col },
                        format!("invalid digit `{ch}` in literal"),
                    )
                })?;
                value = value
                    .checked_mul(base as u128)
                    .and_then(|v| v.checked_add(d as u128))
                    .ok_or_else(|| Diag::new(DiagKind::Syntax, span, "literal too large"))?;
                digits += 1;
                bump!();
            }
            if digits == 0 {
                return Err(Diag::new(DiagKind::Syntax, span, "literal without digits"));
            }
            let width = match radix {
                super::ast::Radix::Hex => Some(digits * 4),
                super::ast::Radix::Bin => Some(digits),
                super::ast::Radix::Dec => None,
            };
            if matches!(width, Some(w) if w > crate::value::MAX_WIDTH) {
                return Err(Diag::new(DiagKind::Syntax, span, "literal wider than 128 bits"));
            }
            toks.push(Token {
                tok: Tok::Int {
                    value,
                    radix,
                    width,
                },
                span,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(Diag::new(DiagKind::Syntax, span, "unterminated string"));
                }
                let ch = chars[i];
                bump!();
                match ch {
                    '"' => break,
                    '\\' => {
                        if i >= chars.len() {
                            return Err(Diag::new(DiagKind::Syntax, span, "unterminated string"));
                        }
                        let e = chars[i];
                        bump!();
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                    }
                    _ => s.push(ch),
                }
            }
            toks.push(Token {
                tok: Tok::Str(s),
                span,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    bump!();
                }
                toks.push(Token {
                    tok: Tok::Punct(p),
                    span,
                });
            }
            None => {
                return Err(Diag::new(
                    DiagKind::Syntax,
                    span,
                    format!("unexpected character `{c}`"),
                ))
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(toks)
}
