//! Fixed-width two's-complement bit vectors.
//!
//! Every runtime value in the toolkit is a [`Value`]: up to 128 bits plus a
//! width. Arithmetic wraps at the width. Signedness is not stored; operations
//! that care (comparison, right shift, extension) come in signed and unsigned
//! flavors.

use std::fmt;

pub const MAX_WIDTH: u32 = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value {
    bits: u128,
    width: u32,
}

#[inline]
pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

// Width-aware arithmetic, deliberately not the std operator traits.
#[allow(clippy::should_implement_trait)]
impl Value {
    pub fn new(bits: u128, width: u32) -> Self {
        debug_assert!((1..=MAX_WIDTH).contains(&width), "bad width {width}");
        Value {
            bits: bits & mask(width),
            width,
        }
    }

    pub fn from_i128(v: i128, width: u32) -> Self {
        Value::new(v as u128, width)
    }

    pub fn bool(b: bool) -> Self {
        Value::new(b as u128, 1)
    }

    pub fn zero(width: u32) -> Self {
        Value::new(0, width)
    }

    pub fn bits(self) -> u128 {
        self.bits
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn is_true(self) -> bool {
        self.bits != 0
    }

    pub fn as_u64(self) -> u64 {
        self.bits as u64
    }

    /// Signed interpretation.
    pub fn to_i128(self) -> i128 {
        if self.width >= 128 {
            return self.bits as i128;
        }
        let sign = 1u128 << (self.width - 1);
        if self.bits & sign != 0 {
            (self.bits | !mask(self.width)) as i128
        } else {
            self.bits as i128
        }
    }

    pub fn add(self, o: Value) -> Value {
        Value::new(self.bits.wrapping_add(o.bits), self.width)
    }

    pub fn sub(self, o: Value) -> Value {
        Value::new(self.bits.wrapping_sub(o.bits), self.width)
    }

    pub fn mul(self, o: Value) -> Value {
        Value::new(self.bits.wrapping_mul(o.bits), self.width)
    }

    /// Double-width product of two values interpreted as signed or unsigned.
    pub fn mul_wide(self, o: Value, signed: bool) -> Value {
        let w = self.width * 2;
        if signed {
            let p = self.to_i128().wrapping_mul(o.to_i128());
            Value::from_i128(p, w.min(MAX_WIDTH))
        } else {
            Value::new(self.bits.wrapping_mul(o.bits), w.min(MAX_WIDTH))
        }
    }

    pub fn and(self, o: Value) -> Value {
        Value::new(self.bits & o.bits, self.width)
    }

    pub fn or(self, o: Value) -> Value {
        Value::new(self.bits | o.bits, self.width)
    }

    pub fn xor(self, o: Value) -> Value {
        Value::new(self.bits ^ o.bits, self.width)
    }

    pub fn not(self) -> Value {
        Value::new(!self.bits, self.width)
    }

    pub fn neg(self) -> Value {
        Value::new(self.bits.wrapping_neg(), self.width)
    }

    /// Shift amounts are taken modulo the width of the shifted operand.
    fn amount(self, amt: Value) -> u32 {
        (amt.bits % self.width as u128) as u32
    }

    pub fn shl(self, amt: Value) -> Value {
        let a = self.amount(amt);
        Value::new(self.bits << a, self.width)
    }

    pub fn lshr(self, amt: Value) -> Value {
        let a = self.amount(amt);
        Value::new(self.bits >> a, self.width)
    }

    pub fn ashr(self, amt: Value) -> Value {
        let a = self.amount(amt);
        Value::from_i128(self.to_i128() >> a, self.width)
    }

    pub fn eq_(self, o: Value) -> Value {
        Value::bool(self.bits == o.bits)
    }

    pub fn ne_(self, o: Value) -> Value {
        Value::bool(self.bits != o.bits)
    }

    pub fn ult(self, o: Value) -> Value {
        Value::bool(self.bits < o.bits)
    }

    pub fn ule(self, o: Value) -> Value {
        Value::bool(self.bits <= o.bits)
    }

    pub fn slt(self, o: Value) -> Value {
        Value::bool(self.to_i128() < o.to_i128())
    }

    pub fn sle(self, o: Value) -> Value {
        Value::bool(self.to_i128() <= o.to_i128())
    }

    pub fn zext(self, width: u32) -> Value {
        Value::new(self.bits, width)
    }

    pub fn sext(self, width: u32) -> Value {
        Value::from_i128(self.to_i128(), width)
    }

    pub fn trunc(self, width: u32) -> Value {
        Value::new(self.bits, width)
    }

    pub fn slice(self, hi: u32, lo: u32) -> Value {
        Value::new(self.bits >> lo, hi - lo + 1)
    }

    /// `self` becomes the high part.
    pub fn concat(self, low: Value) -> Value {
        let w = self.width + low.width;
        let hi = if low.width >= 128 { 0 } else { self.bits << low.width };
        Value::new(hi | low.bits, w)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:x}:{}", self.bits, self.width)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits)
    }
}

/// Zero-padded lowercase hex, one digit per started nibble of `width`.
pub fn hex_padded(bits: u128, width: u32) -> String {
    let digits = width.div_ceil(4).max(1) as usize;
    format!("{:0digits$x}", bits, digits = digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraparound_and_extension() {
        let a = Value::new(0xffff_ffff, 32);
        assert_eq!(a.add(Value::new(1, 32)).bits(), 0);
        assert_eq!(a.to_i128(), -1);
        assert_eq!(Value::new(0x80, 8).sext(32).bits(), 0xffff_ff80);
        assert_eq!(Value::new(0x80, 8).zext(32).bits(), 0x80);
        assert_eq!(Value::new(0x1234_5678, 32).trunc(8).bits(), 0x78);
    }

    #[test]
    fn shifts_take_amount_modulo_width() {
        let v = Value::new(1, 32);
        assert_eq!(v.shl(Value::new(33, 32)).bits(), 2);
        let n = Value::new(0x8000_0000, 32);
        assert_eq!(n.ashr(Value::new(4, 5)).bits(), 0xf800_0000);
        assert_eq!(n.lshr(Value::new(4, 5)).bits(), 0x0800_0000);
    }

    #[test]
    fn concat_and_slice() {
        let v = Value::new(0b101, 3).concat(Value::new(0, 1));
        assert_eq!(v.width(), 4);
        assert_eq!(v.bits(), 0b1010);
        assert_eq!(Value::new(0xabcd, 16).slice(11, 4).bits(), 0xbc);
    }

    #[test]
    fn wide_multiply() {
        let a = Value::from_i128(-3, 32);
        let b = Value::new(5, 32);
        assert_eq!(a.mul_wide(b, true).to_i128(), -15);
        assert_eq!(a.mul_wide(b, true).width(), 64);
        let u = Value::new(0xffff_ffff, 32);
        assert_eq!(u.mul_wide(u, false).bits(), 0xffff_fffe_0000_0001);
    }

    #[test]
    fn hex_padding() {
        assert_eq!(hex_padded(0x13, 32), "00000013");
        assert_eq!(hex_padded(0x3, 5), "03");
    }
}
