mod common;

use std::sync::LazyLock;

use common::random_word;
use pdl_core::asm::{format_asm, infer_grammar, operands_from_fields, Assembler, OperandSet, RuleSource};
use pdl_core::frontend::{rv32i, SpecModel};
use pdl_core::iss::Isa;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

static MODEL: LazyLock<SpecModel> = LazyLock::new(rv32i);
static ISA: LazyLock<Isa<'static>> = LazyLock::new(|| Isa::new(&MODEL).unwrap());
static ASM: LazyLock<Assembler<'static>> = LazyLock::new(|| Assembler::new(&MODEL).unwrap());

/// A legal operand set for `instr`, read back from a random word.
fn operand_set(instr: usize, seed: u64) -> OperandSet {
    let mut rng = StdRng::seed_from_u64(seed);
    let d = ISA.decode(random_word(&ISA, instr, &mut rng)).unwrap();
    operands_from_fields(&MODEL, instr, &d.fields)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4000))]

    #[test]
    fn printed_text_parses_back(instr in 0usize..37, seed in any::<u64>()) {
        let ops = operand_set(instr, seed);
        let text = ASM.format(instr, &ops).unwrap();
        prop_assert_eq!(ASM.parse(&text).unwrap(), (instr, ops), "{}", text);
    }

    #[test]
    fn binary_round_trip(instr in 0usize..37, seed in any::<u64>()) {
        let ops = operand_set(instr, seed);
        let word = ASM.assemble(instr, &ops).unwrap();
        let d = ISA.decode(word).unwrap();
        prop_assert_eq!(d.instr, instr);
        prop_assert_eq!(&operands_from_fields(&MODEL, instr, &d.fields), &ops);
        prop_assert_eq!(ASM.disassemble(word).unwrap(), ASM.format(instr, &ops).unwrap());
    }

    #[test]
    fn inferred_rules_render_like_the_formatter(instr in 0usize..37, seed in any::<u64>()) {
        let ops = operand_set(instr, seed);
        let rule = infer_grammar(&MODEL, instr).unwrap();
        prop_assert_eq!(rule.render(&ops).unwrap(), format_asm(&MODEL, instr, &ops).unwrap());
    }
}

#[test]
fn every_rule_is_inferred() {
    assert_eq!(ASM.inferred_count(), MODEL.instructions.len());
    for i in 0..MODEL.instructions.len() {
        assert!(infer_grammar(&MODEL, i).unwrap().source != RuleSource::Override);
    }
}
