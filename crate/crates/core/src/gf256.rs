//! Arithmetic over GF(2^8) with the field polynomial x^8 + x^4 + x^3 + x^2 + 1.
//!
//! Elements are bytes; addition is XOR and multiplication goes through
//! log/antilog tables built at compile time. The generator `0x02` is
//! primitive for this polynomial, so every nonzero element is a power of it.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Sub};

use crate::error::{Error, Result};

/// Field polynomial 0x11D, including the x^8 term.
pub const FIELD_POLY: u16 = 0x11D;

/// Order of the multiplicative group.
pub const GROUP_ORDER: u32 = 255;

static EXP: [u8; 512] = build_exp();
static LOG: [u8; 256] = build_log();

const fn build_exp() -> [u8; 512] {
    let mut table = [0u8; 512];
    let mut val: u16 = 1;
    let mut i = 0;
    while i < 255 {
        table[i] = val as u8;
        table[i + 255] = val as u8;
        val <<= 1;
        if val & 0x100 != 0 {
            val ^= FIELD_POLY;
        }
        i += 1;
    }
    table[510] = table[0];
    table[511] = table[1];
    table
}

const fn build_log() -> [u8; 256] {
    let exp = build_exp();
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 255 {
        table[exp[i] as usize] = i as u8;
        i += 1;
    }
    table
}

/// An element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldElement(pub u8);

impl FieldElement {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);
    /// The primitive element α = x.
    pub const ALPHA: Self = Self(2);

    #[inline]
    pub const fn new(value: u8) -> Self {
        Self(value)
    }

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// α^k for any integer k (reduced modulo the group order).
    #[inline]
    pub fn alpha_pow(k: i64) -> Self {
        Self(EXP[k.rem_euclid(GROUP_ORDER as i64) as usize])
    }

    /// Discrete logarithm base α, or `None` for zero.
    #[inline]
    pub fn log(self) -> Option<u8> {
        if self.0 == 0 {
            None
        } else {
            Some(LOG[self.0 as usize])
        }
    }

    #[inline]
    pub fn inv(self) -> Result<Self> {
        inv(self)
    }

    #[inline]
    pub fn pow(self, e: i64) -> Result<Self> {
        pow(self, e)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:02X}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:02X}", self.0)
    }
}

impl From<u8> for FieldElement {
    fn from(v: u8) -> Self {
        Self(v)
    }
}

impl From<FieldElement> for u8 {
    fn from(v: FieldElement) -> Self {
        v.0
    }
}

#[inline]
pub fn add(a: FieldElement, b: FieldElement) -> FieldElement {
    FieldElement(a.0 ^ b.0)
}

#[inline]
pub fn mul(a: FieldElement, b: FieldElement) -> FieldElement {
    if a.0 == 0 || b.0 == 0 {
        return FieldElement::ZERO;
    }
    let s = LOG[a.0 as usize] as usize + LOG[b.0 as usize] as usize;
    FieldElement(EXP[s])
}

/// Multiplicative inverse; zero has none.
#[inline]
pub fn inv(a: FieldElement) -> Result<FieldElement> {
    if a.0 == 0 {
        return Err(Error::DivisionByZero);
    }
    Ok(FieldElement(EXP[255 - LOG[a.0 as usize] as usize]))
}

/// `a / b`, failing when `b` is zero.
#[inline]
pub fn div(a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    Ok(mul(a, inv(b)?))
}

/// a^e. Negative exponents are allowed for nonzero bases.
pub fn pow(a: FieldElement, e: i64) -> Result<FieldElement> {
    if e == 0 {
        return Ok(FieldElement::ONE);
    }
    if a.0 == 0 {
        return if e > 0 { Ok(FieldElement::ZERO) } else { Err(Error::DivisionByZero) };
    }
    let l = LOG[a.0 as usize] as i64;
    Ok(FieldElement::alpha_pow(l * e.rem_euclid(GROUP_ORDER as i64)))
}

impl Add for FieldElement {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        add(self, rhs)
    }
}

// addition in characteristic 2 is XOR
#[allow(clippy::suspicious_op_assign_impl)]
impl AddAssign for FieldElement {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

// Subtraction coincides with addition in characteristic 2.
impl Sub for FieldElement {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        add(self, rhs)
    }
}

impl Mul for FieldElement {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        mul(self, rhs)
    }
}

impl MulAssign for FieldElement {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = mul(*self, rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fe(v: u8) -> FieldElement {
        FieldElement(v)
    }

    /// Shift-and-reduce multiply, independent of the tables.
    fn slow_mul(a: u8, b: u8) -> u8 {
        let mut acc: u16 = 0;
        let mut a = a as u16;
        let mut b = b;
        while b != 0 {
            if b & 1 != 0 {
                acc ^= a;
            }
            a <<= 1;
            if a & 0x100 != 0 {
                a ^= FIELD_POLY;
            }
            b >>= 1;
        }
        acc as u8
    }

    #[test]
    fn add_examples() {
        assert_eq!(add(fe(0x00), fe(0x5A)), fe(0x5A));
        assert_eq!(add(fe(0x5A), fe(0x5A)), fe(0x00));
        assert_eq!(add(fe(0x0F), fe(0xF0)), fe(0xFF));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(mul(fe(0x57), fe(0x01)), fe(0x57));
        assert_eq!(mul(fe(0x02), fe(0x80)), fe(0x1D));
        assert_eq!(mul(fe(0x03), fe(0x03)), fe(0x05));
    }

    #[test]
    fn mul_matches_shift_reduce_exhaustively() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(mul(fe(a), fe(b)).0, slow_mul(a, b), "{a:#x} * {b:#x}");
            }
        }
    }

    #[test]
    fn inv_examples() {
        assert_eq!(inv(fe(0x01)).unwrap(), fe(0x01));
        let brute = (1..=255u8).find(|&x| slow_mul(0x02, x) == 1).unwrap();
        assert_eq!(inv(fe(0x02)).unwrap(), fe(brute));
        assert!(matches!(inv(fe(0)), Err(Error::DivisionByZero)));
    }

    #[test]
    fn pow_examples() {
        assert_eq!(pow(fe(0x02), 0).unwrap(), fe(0x01));
        assert_eq!(pow(fe(0x02), 8).unwrap(), fe(0x1D));
        assert_eq!(pow(fe(0x02), 255).unwrap(), fe(0x01));
        assert_eq!(pow(fe(0x00), 3).unwrap(), fe(0x00));
        assert_eq!(pow(fe(0x00), 0).unwrap(), fe(0x01));
        assert!(pow(fe(0x00), -1).is_err());
        assert_eq!(pow(fe(0x02), -1).unwrap(), inv(fe(0x02)).unwrap());
    }

    #[test]
    fn alpha_is_primitive() {
        let mut seen = [false; 256];
        for k in 0..255 {
            let v = pow(FieldElement::ALPHA, k).unwrap().0;
            assert!(!seen[v as usize]);
            seen[v as usize] = true;
        }
        assert!(!seen[0]);
    }

    proptest! {
        #[test]
        fn distributive(a: u8, b: u8, c: u8) {
            let (a, b, c) = (fe(a), fe(b), fe(c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
        }

        #[test]
        fn inverse_of_product(a in 1u8.., b in 1u8..) {
            let (a, b) = (fe(a), fe(b));
            prop_assert_eq!(inv(a * b).unwrap(), inv(a).unwrap() * inv(b).unwrap());
            prop_assert_eq!(a * inv(a).unwrap(), FieldElement::ONE);
        }

        #[test]
        fn pow_is_repeated_mul(a: u8, e in 0i64..600) {
            let a = fe(a);
            let mut acc = FieldElement::ONE;
            for _ in 0..e {
                acc *= a;
            }
            prop_assert_eq!(pow(a, e).unwrap(), acc);
        }
    }
}
