//! Decoder synthesis from instruction encodings.

use std::collections::BTreeMap;
use std::fmt;

use crate::frontend::model::SpecModel;
use crate::value::{mask, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EncodingPattern {
    pub instr: usize,
    pub width: u32,
    pub mask: u128,
    pub value: u128,
}

impl EncodingPattern {
    pub fn matches(&self, word: u128) -> bool {
        word & self.mask == self.value
    }

    pub fn specificity(&self) -> u32 {
        self.mask.count_ones()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("encoding of `{instr}` assigns {value:#x} to the {width}-bit field `{field}`")]
    EncodingWidth {
        instr: String,
        field: String,
        value: u128,
        width: u32,
    },
    #[error("encodings of `{a}` and `{b}` both match {witness:#x} and neither is more specific")]
    Ambiguity { a: String, b: String, witness: u128 },
    #[error("`{a}` and `{b}` have identical encodings")]
    DuplicatePattern { a: String, b: String },
    #[error("instruction formats differ in width ({0} and {1} bits)")]
    MixedWidths(u32, u32),
}

/// Mask and value of the fields fixed by the instruction's encoding.
pub fn derive_pattern(model: &SpecModel, instr: usize) -> Result<EncodingPattern, DecodeError> {
    let ins = &model.instructions[instr];
    let fmt = &model.formats[ins.format];
    let mut m = 0u128;
    let mut v = 0u128;
    for &(fi, val) in &ins.encoding {
        let f = &fmt.fields[fi];
        if val.bits() > mask(f.width) {
            return Err(DecodeError::EncodingWidth {
                instr: ins.name.clone(),
                field: f.name.clone(),
                value: val.bits(),
                width: f.width,
            });
        }
        m |= f.mask();
        v |= f.deposit(val.bits());
    }
    Ok(EncodingPattern {
        instr,
        width: fmt.width,
        mask: m,
        value: v,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    /// Candidates, most specific first.
    Leaf(Vec<usize>),
    /// Branch on the bits in `bits`; words whose value is not in the table
    /// are unknown.
    Split {
        bits: u128,
        table: BTreeMap<u128, Node>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeTree {
    pub width: u32,
    pub patterns: Vec<EncodingPattern>,
    pub root: Node,
}

/// Instruction and raw field values of a decoded word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub instr: usize,
    pub word: u128,
    pub fields: Vec<Value>,
}

fn check_pairs(model: &SpecModel, ps: &[EncodingPattern]) -> Result<(), DecodeError> {
    let name = |p: &EncodingPattern| model.instructions[p.instr].name.clone();
    for (i, a) in ps.iter().enumerate() {
        for b in &ps[i + 1..] {
            let common = a.mask & b.mask;
            if (a.value ^ b.value) & common != 0 {
                continue;
            }
            if a.mask == b.mask {
                return Err(DecodeError::DuplicatePattern { a: name(a), b: name(b) });
            }
            let nested = common == a.mask || common == b.mask;
            if !nested {
                return Err(DecodeError::Ambiguity {
                    a: name(a),
                    b: name(b),
                    witness: a.value | b.value,
                });
            }
        }
    }
    Ok(())
}

fn build_node(ps: &[EncodingPattern], cands: Vec<usize>, tested: u128) -> Node {
    if cands.len() <= 1 {
        return Node::Leaf(cands);
    }
    let common = cands.iter().fold(!0u128, |m, &c| m & ps[c].mask) & !tested;
    if common == 0 {
        let mut c = cands;
        c.sort_by_key(|&i| (std::cmp::Reverse(ps[i].specificity()), i));
        return Node::Leaf(c);
    }
    let mut groups: BTreeMap<u128, Vec<usize>> = BTreeMap::new();
    for c in cands {
        groups.entry(ps[c].value & common).or_default().push(c);
    }
    let table = groups
        .into_iter()
        .map(|(k, g)| (k, build_node(ps, g, tested | common)))
        .collect();
    Node::Split { bits: common, table }
}

/// Builds a decode tree over all instructions of the model.
pub fn build_decode_tree(model: &SpecModel) -> Result<DecodeTree, DecodeError> {
    let mut ps = Vec::new();
    for i in 0..model.instructions.len() {
        ps.push(derive_pattern(model, i)?);
    }
    build_from_patterns(model, ps)
}

/// Builds a decode tree over the given patterns; `model` supplies names
/// for diagnostics.
pub fn build_from_patterns(
    model: &SpecModel,
    ps: Vec<EncodingPattern>,
) -> Result<DecodeTree, DecodeError> {
    let width = ps.first().map(|p| p.width).unwrap_or(model.word_width());
    if let Some(p) = ps.iter().find(|p| p.width != width) {
        return Err(DecodeError::MixedWidths(width, p.width));
    }
    check_pairs(model, &ps)?;
    let root = build_node(&ps, (0..ps.len()).collect(), 0);
    Ok(DecodeTree {
        width,
        patterns: ps,
        root,
    })
}

impl DecodeTree {
    /// Index into `patterns` of the most specific match.
    pub fn lookup(&self, word: u128) -> Option<usize> {
        let mut n = &self.root;
        loop {
            match n {
                Node::Leaf(c) => return c.iter().copied().find(|&i| self.patterns[i].matches(word)),
                Node::Split { bits, table } => n = table.get(&(word & bits))?,
            }
        }
    }

    pub fn decode(&self, model: &SpecModel, word: u128) -> Option<Decoded> {
        let word = word & mask(self.width);
        let p = &self.patterns[self.lookup(word)?];
        let fmt = model.format_of(p.instr);
        Some(Decoded {
            instr: p.instr,
            word,
            fields: fmt.fields.iter().map(|f| f.extract(word)).collect(),
        })
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 1,
                Node::Split { table, .. } => 1 + table.values().map(d).max().unwrap_or(0),
            }
        }
        d(&self.root)
    }
}

/// One line per instruction: name, mask and value in hex.
pub struct Table<'a>(pub &'a SpecModel, pub &'a DecodeTree);

impl fmt::Display for Table<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.1.width.div_ceil(4) as usize;
        let w = self.0.instructions.iter().map(|i| i.name.len()).max().unwrap_or(0);
        for p in &self.1.patterns {
            writeln!(
                f,
                "{:<w$} mask=0x{:0digits$x} value=0x{:0digits$x}",
                self.0.instructions[p.instr].name, p.mask, p.value
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
#[allow(clippy::unusual_byte_groupings)]
mod tests {
    use super::*;
    use crate::frontend::{load_str, rv32i};

    #[test]
    fn beq_pattern() {
        let m = rv32i();
        let p = derive_pattern(&m, m.instruction("BEQ").unwrap()).unwrap();
        assert_eq!(p.mask, 0x707f);
        assert_eq!(p.value, 0x63);
    }

    #[test]
    fn add_word_decodes_with_fields() {
        let m = rv32i();
        let t = build_decode_tree(&m).unwrap();
        let word = 0b0000000_00010_00001_000_00100_0110011u128;
        let d = t.decode(&m, word).unwrap();
        assert_eq!(m.instructions[d.instr].name, "ADD");
        let f = m.format_of(d.instr);
        let get = |n: &str| d.fields[f.field_index(n).unwrap()].bits();
        assert_eq!((get("rd"), get("rs1"), get("rs2")), (4, 1, 2));
        assert_eq!(t.decode(&m, 0xffff_ffff), None);
    }

    #[test]
    fn every_instruction_decodes_its_own_pattern() {
        let m = rv32i();
        let t = build_decode_tree(&m).unwrap();
        for p in &t.patterns {
            assert_eq!(t.decode(&m, p.value).unwrap().instr, p.instr);
        }
    }

    fn tiny(encodings: &str) -> Result<DecodeTree, DecodeError> {
        let src = format!(
            "instruction set architecture T = {{
               register file X : Bits<2> -> Bits<8>
               format F : Bits<8> = {{ op : Bits<4>, r : Bits<2>, s : Bits<2> }}
               instruction A : F = X(r) := X(s)
               instruction B : F = X(r) := X(s)
               {encodings}
               assembly A, B = (mnemonic)
             }}"
        );
        let m = load_str(&src).unwrap();
        build_decode_tree(&m)
    }

    #[test]
    fn single_pattern_is_one_leaf() {
        let src = "instruction set architecture T = {
               register file X : Bits<2> -> Bits<8>
               format F : Bits<8> = { op : Bits<4>, r : Bits<2>, s : Bits<2> }
               instruction A : F = X(r) := X(s)
               encoding A = { op = 0b0001 }
               assembly A = (mnemonic)
             }";
        let m = load_str(src).unwrap();
        let t = build_decode_tree(&m).unwrap();
        assert_eq!(t.root, Node::Leaf(vec![0]));
    }

    #[test]
    fn subsumption_prefers_the_more_specific() {
        let t = tiny("encoding A = { op = 0b0001 } encoding B = { op = 0b0001, r = 0b11 }").unwrap();
        let m_b = t.lookup(0b0001_11_00).unwrap();
        assert_eq!(t.patterns[m_b].instr, 1);
        assert_eq!(t.patterns[t.lookup(0b0001_10_00).unwrap()].instr, 0);
    }

    #[test]
    fn duplicates_and_ambiguity_are_rejected() {
        assert!(matches!(
            tiny("encoding A = { op = 0b0001 } encoding B = { op = 0b0001 }"),
            Err(DecodeError::DuplicatePattern { .. })
        ));
        assert!(matches!(
            tiny("encoding A = { op = 0b0001, r = 0b01 } encoding B = { op = 0b0001, s = 0b10 }"),
            Err(DecodeError::Ambiguity { witness: 0b0001_01_10, .. })
        ));
    }

    #[test]
    fn oversized_constant_is_an_encoding_width_error() {
        assert!(matches!(
            tiny("encoding A = { op = 0b1'0000 } encoding B = { op = 0b0010 }"),
            Err(DecodeError::EncodingWidth { width: 4, .. })
        ));
    }

    #[test]
    fn empty_encoding_matches_everything() {
        let t = tiny("encoding A = { } encoding B = { op = 0b0010 }").unwrap();
        assert_eq!(t.patterns[0].mask, 0);
        assert_eq!(t.patterns[0].value, 0);
        assert_eq!(t.patterns[t.lookup(0xff).unwrap()].instr, 0);
    }
}
