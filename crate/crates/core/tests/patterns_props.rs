mod common;

use std::sync::LazyLock;

use common::pattern_eval::{lines, parse, pattern_agrees, Pat};
use pdl_core::frontend::{rv32i, SpecModel};
use pdl_core::iss::Isa;
use pdl_core::patterns::{emit_patterns, extract_pattern};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

static MODEL: LazyLock<SpecModel> = LazyLock::new(rv32i);
static ISA: LazyLock<Isa<'static>> = LazyLock::new(|| Isa::new(&MODEL).unwrap());
static PATTERNS: LazyLock<Vec<Option<Pat>>> = LazyLock::new(|| {
    let text = emit_patterns(&MODEL, &ISA.graphs);
    let by_name = lines(&text);
    MODEL
        .instructions
        .iter()
        .map(|i| {
            let p = &by_name[&i.name];
            (!p.starts_with("NOT-A-TREE")).then(|| parse(p).unwrap_or_else(|e| panic!("{}: {e}", i.name)))
        })
        .collect()
});

const GOLDEN: &str = include_str!("golden/rv32i.patterns");

#[test]
fn emitted_patterns_match_the_golden_file() {
    assert_eq!(emit_patterns(&MODEL, &ISA.graphs), GOLDEN);
    assert_eq!(emit_patterns(&MODEL, &ISA.graphs), emit_patterns(&MODEL, &ISA.graphs));
}

#[test]
fn every_instruction_gets_a_pattern_or_a_reason() {
    for g in &ISA.graphs {
        if let Err(e) = extract_pattern(&MODEL, g) {
            assert!(!e.0.trim().is_empty(), "{}", MODEL.instructions[g.instr].name);
        }
    }
    assert_eq!(lines(GOLDEN).len(), MODEL.instructions.len());
}

#[test]
fn add_is_a_register_set_of_a_sum() {
    assert_eq!(lines(GOLDEN)["ADD"], "set(X:$rd, add(X:$rs1, X:$rs2))");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4000))]

    #[test]
    fn patterns_compute_what_the_simulator_does(instr in 0usize..37, seed in any::<u64>()) {
        if let Some(p) = &PATTERNS[instr] {
            let mut rng = StdRng::seed_from_u64(seed);
            pattern_agrees(&ISA, instr, p, &mut rng).map_err(TestCaseError::fail)?;
        }
    }
}
