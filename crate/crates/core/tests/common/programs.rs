//! Random straight-line programs with short forward branches.

use proptest::prelude::*;

use super::EXIT;

const OPS: [&str; 6] = ["add", "sub", "xor", "and", "sll", "slt"];

#[derive(Clone, Debug)]
pub enum Ins {
    Alu(usize, u8, u8, u8),
    Imm(u8, u8, i16),
    Load(u8),
    Store(u8),
    Branch(u8, u8, u8),
}

pub fn ins() -> impl Strategy<Value = Ins> {
    let r = 0u8..6;
    prop_oneof![
        (0..OPS.len(), r.clone(), r.clone(), r.clone()).prop_map(|(o, a, b, c)| Ins::Alu(o, a, b, c)),
        (r.clone(), r.clone(), -20i16..20).prop_map(|(a, b, i)| Ins::Imm(a, b, i)),
        r.clone().prop_map(Ins::Load),
        r.clone().prop_map(Ins::Store),
        (r.clone(), r, 1u8..4).prop_map(|(a, b, s)| Ins::Branch(a, b, s)),
    ]
}

pub fn render(prog: &[Ins]) -> String {
    let mut s = String::from("lui x10, 0x80001\n");
    for i in prog {
        s.push_str(&match *i {
            Ins::Alu(o, a, b, c) => format!("{} x{a}, x{b}, x{c}\n", OPS[o]),
            Ins::Imm(a, b, i) => format!("addi x{a}, x{b}, {i}\n"),
            Ins::Load(a) => format!("lw x{a}, 0(x10)\n"),
            Ins::Store(a) => format!("sw x{a}, 4(x10)\n"),
            Ins::Branch(a, b, sk) => format!("bne x{a}, x{b}, {}\n", 4 * (sk as i32 + 1)),
        });
    }
    // forward branches may skip up to three instructions past the end
    s.push_str("addi x0, x0, 0\naddi x0, x0, 0\naddi x0, x0, 0\n");
    s.push_str(EXIT);
    s
}

pub fn program() -> impl Strategy<Value = Vec<Ins>> {
    prop::collection::vec(ins(), 1..24)
}
