mod common;

use common::decode_ref::{field_values, linear_scan, reference_patterns};
use pdl_core::frontend::{rv32i, SpecModel};
use pdl_core::iss::Isa;
use proptest::prelude::*;
use std::sync::LazyLock;

static MODEL: LazyLock<SpecModel> = LazyLock::new(rv32i);
static ISA: LazyLock<Isa<'static>> = LazyLock::new(|| Isa::new(&MODEL).unwrap());
static PATTERNS: LazyLock<Vec<(u128, u128)>> = LazyLock::new(|| reference_patterns(&MODEL));

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5000))]

    /// Free fields filled at random survive decoding unchanged.
    #[test]
    fn free_fields_round_trip(instr in 0usize..37, bits in any::<u128>()) {
        let (m, isa, ps) = (&*MODEL, &*ISA, &*PATTERNS);
        let (mask, value) = ps[instr];
        let word = (bits & !mask & 0xffff_ffff) | value;
        let d = isa.tree.decode(m, word).unwrap();
        let expect = linear_scan(ps, word).unwrap();
        prop_assert_eq!(d.instr, expect);
        if expect == instr {
            let got: Vec<u128> = d.fields.iter().map(|v| v.bits()).collect();
            prop_assert_eq!(got, field_values(m, instr, word));
        }
    }

    #[test]
    fn tree_agrees_with_linear_scan(word in any::<u32>()) {
        let (m, isa, ps) = (&*MODEL, &*ISA, &*PATTERNS);
        prop_assert_eq!(isa.tree.decode(m, word as u128).map(|d| d.instr), linear_scan(ps, word as u128));
    }
}

#[test]
fn library_patterns_match_the_field_ranges() {
    let (m, isa, ps) = (&*MODEL, &*ISA, &*PATTERNS);
    for p in &isa.tree.patterns {
        assert_eq!((p.mask, p.value), ps[p.instr], "{}", m.instructions[p.instr].name);
    }
}
