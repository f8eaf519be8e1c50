//! Real scalars shared by the double and extended precision code paths.
//!
//! Every numerical kernel in this crate is generic over [`Real`], so the same
//! code runs in `f64` and in [`ExtFloat`], a binary floating-point number with
//! a configurable significand width. Complex values are `num_complex::Complex<T>`.
//!
//! Precision travels with the values: an `ExtFloat` remembers its width and
//! binary operations round to the wider of the two operands. There is no
//! global rounding context.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};
use std::str::FromStr;

use astro_float::{BigFloat, Consts, RoundingMode, Sign, Word};
use num_complex::Complex;
use num_traits::{Num, One, Zero};

/// Significand width of an IEEE double.
pub const DOUBLE_BITS: u32 = 53;

/// Default width for the Pick and continuation stages.
pub const DEFAULT_EXTENDED_BITS: u32 = 256;

const RM: RoundingMode = RoundingMode::ToEven;
const WORD_BITS: u32 = Word::BITS;

/// Scalar field used by the generic numerical kernels.
pub trait Real:
    Num + Neg<Output = Self> + Clone + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts a double into a scalar with `bits` significand bits (exact).
    fn from_f64_bits(x: f64, bits: u32) -> Self;

    fn from_int(n: i64, bits: u32) -> Self;

    fn pi(bits: u32) -> Self;

    fn to_f64(&self) -> f64;

    fn sqrt(&self) -> Self;

    fn abs(&self) -> Self;

    /// Significand width carried by this value.
    fn bits(&self) -> u32;

    fn is_finite(&self) -> bool;

    /// `2^e` at the given width.
    fn exp2(e: i32, bits: u32) -> Self;

    /// Converts to an extended float of the given width.
    fn to_ext(&self, bits: u32) -> ExtFloat;

    fn ratio(num: i64, den: i64, bits: u32) -> Self {
        Self::from_int(num, bits) / Self::from_int(den, bits)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64_bits(x: f64, _bits: u32) -> Self {
        x
    }
    fn from_int(n: i64, _bits: u32) -> Self {
        n as f64
    }
    fn pi(_bits: u32) -> Self {
        std::f64::consts::PI
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn bits(&self) -> u32 {
        DOUBLE_BITS
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn exp2(e: i32, _bits: u32) -> Self {
        2f64.powi(e)
    }
    fn to_ext(&self, bits: u32) -> ExtFloat {
        ExtFloat::new(*self, bits)
    }
}

/// Binary floating-point number with a configurable significand width.
///
/// Arithmetic is correctly rounded (round-half-to-even) at the wider operand
/// width. Widths are rounded up to whole 64-bit words by the backend, so a
/// requested width of 100 bits computes with 128.
#[derive(Clone)]
pub struct ExtFloat {
    value: BigFloat,
    // 0 marks the exact constants produced by `Zero`/`One`; they adopt the
    // width of whatever they are combined with.
    bits: u32,
}

impl ExtFloat {
    pub fn new(x: f64, bits: u32) -> Self {
        Self::from_f64_bits(x, bits)
    }

    fn exact(x: f64) -> Self {
        ExtFloat {
            value: BigFloat::from_f64(x, WORD_BITS as usize),
            bits: 0,
        }
    }

    fn working_bits(a: u32, b: u32) -> usize {
        match a.max(b) {
            0 => WORD_BITS as usize,
            p => p as usize,
        }
    }

    pub fn inner(&self) -> &BigFloat {
        &self.value
    }

    /// Re-rounds to a new width.
    pub fn with_bits(&self, bits: u32) -> Self {
        let mut value = self.value.clone();
        value.set_precision(bits.max(1) as usize, RM).ok();
        ExtFloat { value, bits }
    }

    pub fn is_nan(&self) -> bool {
        self.value.is_nan()
    }

    pub fn nan(bits: u32) -> Self {
        ExtFloat {
            value: BigFloat::nan(None),
            bits,
        }
    }

    /// Exact textual form: `[-]0x<mantissa words>p<binary exponent>`.
    ///
    /// The mantissa is a binary fraction in `[1/2, 1)` written as full 64-bit
    /// words, most significant first. `from_hex_str` inverts it bit for bit.
    pub fn to_hex_string(&self) -> String {
        if self.value.is_nan() {
            return "nan".to_string();
        }
        if self.value.is_inf_pos() {
            return "inf".to_string();
        }
        if self.value.is_inf_neg() {
            return "-inf".to_string();
        }
        let (words, _, sign, exp, _) = self
            .value
            .as_raw_parts()
            .expect("finite value has raw parts");
        let mut out = String::new();
        if sign == Sign::Neg && !self.value.is_zero() {
            out.push('-');
        }
        out.push_str("0x");
        if words.is_empty() {
            let n = (self.bits.max(1) + WORD_BITS - 1) / WORD_BITS;
            out.push_str(&"0".repeat(16 * n as usize));
        }
        for w in words.iter().rev() {
            out.push_str(&format!("{:016x}", w));
        }
        out.push_str(&format!("p{}", exp));
        out
    }

    pub fn from_hex_str(s: &str) -> Result<Self, ParseExtFloatError> {
        let bad = || ParseExtFloatError(s.to_string());
        match s {
            "nan" => return Ok(ExtFloat::nan(DEFAULT_EXTENDED_BITS)),
            "inf" => {
                return Ok(ExtFloat {
                    value: BigFloat::from_f64(f64::INFINITY, DEFAULT_EXTENDED_BITS as usize),
                    bits: DEFAULT_EXTENDED_BITS,
                })
            }
            "-inf" => {
                return Ok(ExtFloat {
                    value: BigFloat::from_f64(f64::NEG_INFINITY, DEFAULT_EXTENDED_BITS as usize),
                    bits: DEFAULT_EXTENDED_BITS,
                })
            }
            _ => {}
        }
        let (sign, rest) = match s.strip_prefix('-') {
            Some(r) => (Sign::Neg, r),
            None => (Sign::Pos, s),
        };
        let rest = rest.strip_prefix("0x").ok_or_else(bad)?;
        let (digits, exp) = rest.split_once('p').ok_or_else(bad)?;
        if digits.is_empty() || digits.len() % 16 != 0 {
            return Err(bad());
        }
        let exp: i32 = exp.parse().map_err(|_| bad())?;
        let mut words: Vec<Word> = digits
            .as_bytes()
            .chunks(16)
            .map(|c| {
                std::str::from_utf8(c)
                    .ok()
                    .and_then(|h| Word::from_str_radix(h, 16).ok())
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(bad)?;
        words.reverse();
        let bits = words.len() as u32 * WORD_BITS;
        if words.iter().all(|w| *w == 0) {
            let mut zero = BigFloat::from_f64(0.0, bits as usize);
            if sign == Sign::Neg {
                zero = zero.neg();
            }
            return Ok(ExtFloat { value: zero, bits });
        }
        let value = BigFloat::from_raw_parts(&words, bits as usize, sign, exp, false);
        if value.is_nan() {
            return Err(bad());
        }
        Ok(ExtFloat { value, bits })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse extended float from {0:?}")]
pub struct ParseExtFloatError(String);

impl Real for ExtFloat {
    fn from_f64_bits(x: f64, bits: u32) -> Self {
        ExtFloat {
            value: BigFloat::from_f64(x, bits.max(DOUBLE_BITS) as usize),
            bits: bits.max(DOUBLE_BITS),
        }
    }

    fn from_int(n: i64, bits: u32) -> Self {
        ExtFloat {
            value: BigFloat::from_i64(n, bits.max(WORD_BITS) as usize),
            bits,
        }
    }

    fn pi(bits: u32) -> Self {
        let mut consts = Consts::new().expect("constant cache allocation");
        ExtFloat {
            value: consts.pi(bits as usize, RM),
            bits,
        }
    }

    fn to_f64(&self) -> f64 {
        let v = &self.value;
        if v.is_nan() {
            return f64::NAN;
        }
        if v.is_inf_pos() {
            return f64::INFINITY;
        }
        if v.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        if v.is_zero() {
            return 0.0;
        }
        let (words, _, sign, exp, _) = v.as_raw_parts().expect("finite value");
        let n = words.len();
        let top = words[n - 1] as f64 * 2f64.powi(-64);
        let next = if n > 1 {
            words[n - 2] as f64 * 2f64.powi(-128)
        } else {
            0.0
        };
        let mut frac = top + next;
        // ldexp in two steps so that neither factor overflows on its own
        let half = exp / 2;
        frac *= 2f64.powi(half);
        frac *= 2f64.powi(exp - half);
        if sign == Sign::Neg {
            -frac
        } else {
            frac
        }
    }

    fn sqrt(&self) -> Self {
        let p = Self::working_bits(self.bits, 0);
        ExtFloat {
            value: self.value.sqrt(p, RM),
            bits: self.bits,
        }
    }

    fn abs(&self) -> Self {
        ExtFloat {
            value: self.value.abs(),
            bits: self.bits,
        }
    }

    fn bits(&self) -> u32 {
        self.bits
    }

    fn is_finite(&self) -> bool {
        !(self.value.is_nan() || self.value.is_inf())
    }

    fn exp2(e: i32, bits: u32) -> Self {
        let mut value = BigFloat::from_f64(1.0, bits.max(WORD_BITS) as usize);
        // 1.0 is stored as 0.5 * 2^1
        value.set_exponent(e + 1);
        ExtFloat { value, bits }
    }

    fn to_ext(&self, bits: u32) -> ExtFloat {
        self.with_bits(bits)
    }
}

macro_rules! ext_binop {
    ($trait:ident, $method:ident, $op:ident) => {
        impl $trait<ExtFloat> for ExtFloat {
            type Output = ExtFloat;
            fn $method(self, rhs: ExtFloat) -> ExtFloat {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a ExtFloat> for ExtFloat {
            type Output = ExtFloat;
            fn $method(self, rhs: &'a ExtFloat) -> ExtFloat {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<ExtFloat> for &'a ExtFloat {
            type Output = ExtFloat;
            fn $method(self, rhs: ExtFloat) -> ExtFloat {
                self.$method(&rhs)
            }
        }
        impl<'a, 'b> $trait<&'b ExtFloat> for &'a ExtFloat {
            type Output = ExtFloat;
            fn $method(self, rhs: &'b ExtFloat) -> ExtFloat {
                let p = ExtFloat::working_bits(self.bits, rhs.bits);
                ExtFloat {
                    value: self.value.$op(&rhs.value, p, RM),
                    bits: self.bits.max(rhs.bits),
                }
            }
        }
    };
}

ext_binop!(Add, add, add);
ext_binop!(Sub, sub, sub);
ext_binop!(Mul, mul, mul);
ext_binop!(Div, div, div);

impl Rem for ExtFloat {
    type Output = ExtFloat;
    fn rem(self, rhs: ExtFloat) -> ExtFloat {
        ExtFloat {
            value: self.value.rem(&rhs.value),
            bits: self.bits.max(rhs.bits),
        }
    }
}

impl Neg for ExtFloat {
    type Output = ExtFloat;
    fn neg(self) -> ExtFloat {
        ExtFloat {
            value: self.value.neg(),
            bits: self.bits,
        }
    }
}

impl<'a> Neg for &'a ExtFloat {
    type Output = ExtFloat;
    fn neg(self) -> ExtFloat {
        ExtFloat {
            value: self.value.clone().neg(),
            bits: self.bits,
        }
    }
}

impl PartialEq for ExtFloat {
    fn eq(&self, other: &Self) -> bool {
        self.value.cmp(&other.value) == Some(0)
    }
}

impl PartialOrd for ExtFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.cmp(&other.value).map(|c| c.cmp(&0))
    }
}

impl Zero for ExtFloat {
    fn zero() -> Self {
        ExtFloat::exact(0.0)
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero()
    }
}

impl One for ExtFloat {
    fn one() -> Self {
        ExtFloat::exact(1.0)
    }
}

impl Num for ExtFloat {
    type FromStrRadixErr = ParseExtFloatError;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        if radix != 10 {
            return Err(ParseExtFloatError(s.to_string()));
        }
        s.parse()
    }
}

impl FromStr for ExtFloat {
    type Err = ParseExtFloatError;

    /// Parses either the exact hex form or a decimal literal (rounded to
    /// [`DEFAULT_EXTENDED_BITS`]).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains("0x") || s == "nan" || s.ends_with("inf") {
            return ExtFloat::from_hex_str(s);
        }
        let mut consts = Consts::new().map_err(|_| ParseExtFloatError(s.to_string()))?;
        let value = BigFloat::parse(
            s,
            astro_float::Radix::Dec,
            DEFAULT_EXTENDED_BITS as usize,
            RM,
            &mut consts,
        );
        if value.is_nan() {
            return Err(ParseExtFloatError(s.to_string()));
        }
        Ok(ExtFloat {
            value,
            bits: DEFAULT_EXTENDED_BITS,
        })
    }
}

impl fmt::Debug for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}b]", self.value, self.bits)
    }
}

impl fmt::Display for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Modulus of a complex scalar.
pub fn cabs<T: Real>(z: &Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

pub fn cplx<T: Real>(re: f64, im: f64, bits: u32) -> Complex<T> {
    Complex::new(T::from_f64_bits(re, bits), T::from_f64_bits(im, bits))
}

/// Lifts a double-precision complex number to `T` without rounding.
pub fn lift<T: Real>(z: Complex<f64>, bits: u32) -> Complex<T> {
    cplx(z.re, z.im, bits)
}

pub fn lower<T: Real>(z: &Complex<T>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

/// Dimensionless imaginary Matsubara point `i(2n+1)π`; `n` may be negative.
pub fn matsubara_point<T: Real>(n: i64, pi: &T) -> Complex<T> {
    let bits = pi.bits();
    Complex::new(T::zero(), T::from_int(2 * n + 1, bits) * pi.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_arithmetic_matches_double_on_exact_values() {
        let a = ExtFloat::new(1.5, 128);
        let b = ExtFloat::new(-0.25, 128);
        assert_eq!((a.clone() + b.clone()).to_f64(), 1.25);
        assert_eq!((a.clone() * b.clone()).to_f64(), -0.375);
        assert_eq!((a / b).to_f64(), -6.0);
    }

    #[test]
    fn ext_precision_beyond_double() {
        let third = ExtFloat::ratio(1, 3, 256);
        let err = third.clone() * ExtFloat::from_int(3, 256) - ExtFloat::one();
        assert!(err.abs() <= ExtFloat::exp2(-250, 256));
        // 1 + 2^-100 is distinguishable at 256 bits but not in a double
        let tiny = ExtFloat::exp2(-100, 256);
        let sum = ExtFloat::one() + tiny;
        assert!(sum > ExtFloat::from_int(1, 256));
        assert_eq!(sum.to_f64(), 1.0);
    }

    #[test]
    fn pi_and_sqrt() {
        let pi = ExtFloat::pi(256);
        assert!((pi.to_f64() - std::f64::consts::PI).abs() < 1e-16);
        let two = ExtFloat::from_int(2, 256);
        let r = two.sqrt();
        let back = r.clone() * r - ExtFloat::from_int(2, 256);
        assert!(back.abs() <= ExtFloat::exp2(-250, 256));
    }

    #[test]
    fn exact_constants_adopt_width() {
        let x = ExtFloat::new(3.0, 192);
        let y = ExtFloat::zero() + x;
        assert_eq!(y.bits(), 192);
        assert_eq!(ExtFloat::exp2(-3, 128).to_f64(), 0.125);
    }

    #[test]
    fn hex_round_trip_is_exact() {
        for x in [0.1, -7.25e-30, 12345.678, 0.0] {
            let v = ExtFloat::ratio(1, 7, 256) * ExtFloat::new(x, 256);
            let s = v.to_hex_string();
            let back = ExtFloat::from_hex_str(&s).unwrap();
            assert!(back == v, "{s}");
            assert_eq!(back.to_hex_string(), s);
        }
        assert!(ExtFloat::from_hex_str("0x12p3").is_err());
        assert!(ExtFloat::from_hex_str("garbage").is_err());
    }

    #[test]
    fn to_f64_of_small_and_large() {
        for x in [1e-300, -3.5e250, 0.1, -1.0] {
            assert_eq!(ExtFloat::new(x, 256).to_f64(), x);
        }
    }

    #[test]
    fn complex_division_in_extended_precision() {
        let pi = ExtFloat::pi(256);
        let w: Complex<ExtFloat> = matsubara_point(0, &pi);
        let g = Complex::new(ExtFloat::one(), ExtFloat::zero()) / w;
        let expected = -1.0 / std::f64::consts::PI;
        assert!((g.im.to_f64() - expected).abs() < 1e-16);
        assert!(g.re.is_zero());
    }
}
