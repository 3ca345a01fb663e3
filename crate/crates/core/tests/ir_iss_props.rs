mod common;

use std::collections::HashSet;
use std::sync::LazyLock;

use common::{random_state, random_state_agrees, random_word};
use pdl_core::frontend::model::Resource;
use pdl_core::frontend::{load_str, rv32i, SpecModel};
use pdl_core::ir::{build_behavior, evaluate, Effect};
use pdl_core::iss::{check_double_writes, Isa, Iss, StateInputs};
use pdl_core::value::Value;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

static MODEL: LazyLock<SpecModel> = LazyLock::new(rv32i);
static ISA: LazyLock<Isa<'static>> = LazyLock::new(|| Isa::new(&MODEL).unwrap());

fn effects_on_random_state(instr: usize, seed: u64) -> (Vec<Effect>, Vec<Effect>, pdl_core::iss::MachineState) {
    let mut rng = StdRng::seed_from_u64(seed);
    let st = random_state(&ISA, &mut rng);
    let d = ISA.decode(random_word(&ISA, instr, &mut rng)).unwrap();
    let mut inp = StateInputs { state: &st, d: &d, pc: ISA.pc_view(st.pc) };
    let canonical = evaluate(&ISA.graphs[instr], &mut inp);
    let raw = evaluate(&build_behavior(&MODEL, instr), &mut inp);
    (canonical, raw, st)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn simulator_matches_reference_interpreter(instr in 0usize..37, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        random_state_agrees(&ISA, instr, &mut rng).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn canonicalization_preserves_effects(instr in 0usize..37, seed in any::<u64>()) {
        let (canonical, raw, _) = effects_on_random_state(instr, seed);
        prop_assert_eq!(canonical, raw);
    }

    /// No two enabled writes of one instruction hit the same location.
    #[test]
    fn enabled_writes_are_disjoint(instr in 0usize..37, seed in any::<u64>()) {
        let (canonical, _, st) = effects_on_random_state(instr, seed);
        prop_assert!(check_double_writes(&MODEL, &st, 0, &canonical).is_ok());
    }
}

#[test]
fn canonical_graphs_have_unique_pure_nodes() {
    for g in &ISA.graphs {
        let mut seen = HashSet::new();
        for n in g.nodes.iter().filter(|n| n.kind.is_pure()) {
            assert!(seen.insert(n), "{}: duplicate {:?}", MODEL.instructions[g.instr].name, n.kind);
        }
    }
}

const SWAP: &str = "
  instruction set architecture S = {
    memory M : Bits<32> -> Bits<8>
    program counter PC : Bits<32>
    register file X : Bits<5> -> Bits<32>
    format F : Bits<32> = { a : Bits<5>, b : Bits<5>, op : Bits<22> }
    instruction SWAP : F = let t = X(a) in {
      X(a) := X(b)
      X(b) := t
    }
    encoding SWAP = { op = 1 }
    assembly SWAP = (mnemonic)
  }";

proptest! {
    #[test]
    fn writes_do_not_affect_reads_of_the_same_instruction(a in 0u32..32, b in 0u32..32, x in any::<u32>(), y in any::<u32>()) {
        prop_assume!(a != b);
        let m = load_str(SWAP).unwrap();
        let isa = Isa::new(&m).unwrap();
        let mut iss = Iss::new(&isa, true);
        let word = ((a as u128) << 27) | ((b as u128) << 22) | 1;
        iss.state.mems[0].write(0, 4, Value::new(word, 32));
        iss.state.files[0][a as usize] = Value::new(x as u128, 32);
        iss.state.files[0][b as usize] = Value::new(y as u128, 32);
        let rec = iss.step().unwrap();
        prop_assert_eq!(iss.state.files[0][a as usize].bits(), y as u128);
        prop_assert_eq!(iss.state.files[0][b as usize].bits(), x as u128);
        prop_assert_eq!(rec.writes.len(), 2);
        prop_assert!(rec.writes.iter().all(|w| w.res == Resource::File(0)));
    }
}
