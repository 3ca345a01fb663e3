//! Decoding by scanning every encoding, as a reference for the decode tree.

use pdl_core::frontend::SpecModel;

/// (mask, value) of each instruction, from field bit ranges.
pub fn reference_patterns(m: &SpecModel) -> Vec<(u128, u128)> {
    (0..m.instructions.len())
        .map(|i| {
            let fmt = m.format_of(i);
            let (mut mask, mut value) = (0u128, 0u128);
            for (f, v) in &m.instructions[i].encoding {
                let field = &fmt.fields[*f];
                let mut rest = field.width;
                for &(hi, lo) in &field.ranges {
                    let w = hi - lo + 1;
                    rest -= w;
                    let ones = (1u128 << w) - 1;
                    mask |= ones << lo;
                    value |= ((v.bits() >> rest) & ones) << lo;
                }
            }
            (mask, value)
        })
        .collect()
}

/// The matching instruction with the most fixed bits.
pub fn linear_scan(ps: &[(u128, u128)], word: u128) -> Option<usize> {
    ps.iter()
        .enumerate()
        .filter(|(_, (m, v))| word & m == *v)
        .max_by_key(|(i, (m, _))| (m.count_ones(), std::cmp::Reverse(*i)))
        .map(|(i, _)| i)
}

pub fn field_values(m: &SpecModel, instr: usize, word: u128) -> Vec<u128> {
    m.format_of(instr)
        .fields
        .iter()
        .map(|f| {
            let mut v = 0u128;
            for &(hi, lo) in &f.ranges {
                let w = hi - lo + 1;
                v = (v << w) | ((word >> lo) & ((1u128 << w) - 1));
            }
            v
        })
        .collect()
}
