use super::parse::{tokenize, Tok};
use super::{AsmError, Assembler};
use crate::value::hex_padded;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ListingLine {
    pub addr: u64,
    pub word: u128,
    /// 1-based source line.
    pub line: usize,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Listing {
    pub base: u64,
    pub word_bits: u32,
    pub lines: Vec<ListingLine>,
}

fn addr_text(a: u64) -> String {
    hex_padded(a as u128, if a >> 32 == 0 { 32 } else { 64 })
}

impl Listing {
    /// Flat little-endian image of the packed words.
    pub fn bytes(&self) -> Vec<u8> {
        let n = self.word_bits.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(self.lines.len() * n);
        for l in &self.lines {
            out.extend_from_slice(&l.word.to_le_bytes()[..n]);
        }
        out
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&format!(
                "{}: {}  {}\n",
                addr_text(l.addr),
                hex_padded(l.word, self.word_bits),
                l.source
            ));
        }
        s
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map(|(a, _)| a).unwrap_or(line).trim()
}

impl Assembler<'_> {
    fn data_word(&self, stmt: &str) -> Result<Option<u128>, AsmError> {
        let toks = tokenize(stmt);
        if toks.first().map(|t| &t.tok) != Some(&Tok::Ident(".word".into())) {
            return Ok(None);
        }
        let w = self.tree.width;
        match toks.get(1).map(|t| &t.tok) {
            Some(Tok::Int(v)) if toks.len() == 2 => {
                let min = -(1i128 << (w - 1));
                let max = (crate::value::mask(w) as i128).max(0);
                if *v < min || *v > max {
                    return Err(AsmError::OperandRange {
                        operand: ".word".into(),
                        value: *v,
                        min,
                        max,
                    });
                }
                Ok(Some(*v as u128 & crate::value::mask(w)))
            }
            _ => Err(AsmError::Parse {
                pos: toks.get(1).map(|t| t.pos).unwrap_or(stmt.len()),
                expected: vec!["integer".into()],
            }),
        }
    }

    /// Assembles one statement per line. `.word N` emits a literal word.
    /// All failing lines are reported.
    pub fn assemble_program(&self, src: &str, base: u64) -> Result<Listing, Vec<(usize, AsmError)>> {
        let step = self.tree.width.div_ceil(8) as u64;
        let mut lines = Vec::new();
        let mut errors = Vec::new();
        for (n, raw) in src.lines().enumerate() {
            let stmt = strip_comment(raw);
            if stmt.is_empty() {
                continue;
            }
            let word = match self.data_word(stmt) {
                Ok(Some(w)) => Ok(w),
                Ok(None) => self.assemble_line(stmt),
                Err(e) => Err(e),
            };
            match word {
                Ok(word) => lines.push(ListingLine {
                    addr: base + step * lines.len() as u64,
                    word,
                    line: n + 1,
                    source: stmt.to_string(),
                }),
                Err(e) => errors.push((n + 1, e)),
            }
        }
        if errors.is_empty() {
            Ok(Listing {
                base,
                word_bits: self.tree.width,
                lines,
            })
        } else {
            Err(errors)
        }
    }

    /// Text that assembles back to `bytes`; unknown words become `.word`.
    pub fn disassemble_program(&self, bytes: &[u8], base: u64) -> String {
        let n = self.tree.width.div_ceil(8) as usize;
        let mut out = String::new();
        let chunks = bytes.chunks_exact(n);
        let tail = chunks.remainder().len();
        for (i, c) in chunks.enumerate() {
            let mut buf = [0u8; 16];
            buf[..n].copy_from_slice(c);
            let word = u128::from_le_bytes(buf);
            let text = self
                .disassemble(word)
                .unwrap_or_else(|_| format!(".word 0x{}", hex_padded(word, self.tree.width)));
            out.push_str(&format!(
                "{:<32}# {}: {}\n",
                text,
                addr_text(base + (i * n) as u64),
                hex_padded(word, self.tree.width)
            ));
        }
        if tail > 0 {
            out.push_str(&format!("# {tail} trailing bytes ignored\n"));
        }
        out
    }
}
