//! Processor description toolkit.

pub mod frontend;
pub mod asm;
pub mod cas;
pub mod decode;
pub mod ir;
pub mod iss;
pub mod mia;
pub mod patterns;
pub mod value;
