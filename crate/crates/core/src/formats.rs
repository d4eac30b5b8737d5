//! Parameterized IEEE-style binary formats `F(n, |E|)`, decoding, and exact
//! rounding under the five IEEE modes plus round-to-odd.
//!
//! A format has one sign bit, `|E|` exponent bits and `n - 1 - |E|` stored
//! mantissa bits. Positive finite encodings are ordered like the values they
//! represent, which is what the rounding code below relies on: rounding picks
//! between an encoding and its successor.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{floor_log2, mul_pow2, pow2, scaled_floor, ExactReal};

/// Default refusal threshold for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u32 = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FpFormat {
    total_bits: u32,
    exponent_bits: u32,
}

impl FpFormat {
    pub const BFLOAT16: FpFormat = FpFormat { total_bits: 16, exponent_bits: 8 };
    pub const TENSORFLOAT32: FpFormat = FpFormat { total_bits: 19, exponent_bits: 8 };
    pub const FLOAT32: FpFormat = FpFormat { total_bits: 32, exponent_bits: 8 };

    /// Formats must fit in binary64 exactly: at most 11 exponent bits and at
    /// most 52 stored mantissa bits.
    pub fn new(total_bits: u32, exponent_bits: u32) -> Result<Self> {
        if exponent_bits < 2 {
            return Err(Error::InvalidFormat(format!(
                "fp({total_bits},{exponent_bits}): need at least 2 exponent bits"
            )));
        }
        if 1 + exponent_bits >= total_bits {
            return Err(Error::InvalidFormat(format!(
                "fp({total_bits},{exponent_bits}): need at least one mantissa bit"
            )));
        }
        if exponent_bits > 11 || total_bits - 1 - exponent_bits > 52 || total_bits > 64 {
            return Err(Error::InvalidFormat(format!(
                "fp({total_bits},{exponent_bits}): values must embed exactly in binary64"
            )));
        }
        Ok(FpFormat { total_bits, exponent_bits })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.total_bits - 1 - self.exponent_bits
    }

    /// Significand precision including the hidden bit.
    pub fn precision(&self) -> u32 {
        self.mantissa_bits() + 1
    }

    pub fn bias(&self) -> i64 {
        (1i64 << (self.exponent_bits - 1)) - 1
    }

    pub fn emin(&self) -> i64 {
        1 - self.bias()
    }

    pub fn emax(&self) -> i64 {
        self.bias()
    }

    /// Same exponent width, `extra` more mantissa bits.
    pub fn widened(&self, extra: u32) -> Result<Self> {
        FpFormat::new(self.total_bits + extra, self.exponent_bits)
    }

    fn sign_mask(&self) -> u64 {
        1u64 << (self.total_bits - 1)
    }

    fn magnitude_mask(&self) -> u64 {
        self.sign_mask() - 1
    }

    /// Magnitude encoding of +infinity.
    pub fn inf_magnitude(&self) -> u64 {
        ((1u64 << self.exponent_bits) - 1) << self.mantissa_bits()
    }

    pub fn max_finite_magnitude(&self) -> u64 {
        self.inf_magnitude() - 1
    }

    pub fn encoding_count(&self) -> u64 {
        1u64 << self.total_bits
    }

    pub fn value(&self, bits: u64) -> FpValue {
        FpValue::new(*self, bits)
    }

    pub fn pos_zero(&self) -> FpValue {
        FpValue { format: *self, bits: 0 }
    }

    pub fn neg_zero(&self) -> FpValue {
        FpValue { format: *self, bits: self.sign_mask() }
    }

    pub fn pos_inf(&self) -> FpValue {
        FpValue { format: *self, bits: self.inf_magnitude() }
    }

    pub fn neg_inf(&self) -> FpValue {
        FpValue { format: *self, bits: self.inf_magnitude() | self.sign_mask() }
    }

    /// The canonical quiet NaN: positive, top mantissa bit set.
    pub fn nan(&self) -> FpValue {
        FpValue { format: *self, bits: self.inf_magnitude() | (1u64 << (self.mantissa_bits() - 1)) }
    }

    /// Short name: the aliases for the three named layouts, `fp(n,E)` otherwise.
    pub fn name(&self) -> String {
        match *self {
            FpFormat::BFLOAT16 => "bfloat16".into(),
            FpFormat::TENSORFLOAT32 => "tensorfloat32".into(),
            FpFormat::FLOAT32 => "float32".into(),
            _ => self.canonical(),
        }
    }

    pub fn canonical(&self) -> String {
        format!("fp({},{})", self.total_bits, self.exponent_bits)
    }

    /// Every encoding in ascending unsigned order.
    pub fn enumerate(&self) -> Result<impl Iterator<Item = FpValue>> {
        self.enumerate_capped(DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_capped(&self, cap: u32) -> Result<impl Iterator<Item = FpValue>> {
        if self.total_bits > cap {
            return Err(Error::EnumerationCap { format: self.canonical(), bits: self.total_bits, cap });
        }
        let fmt = *self;
        Ok((0..fmt.encoding_count()).map(move |bits| FpValue { format: fmt, bits }))
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for FpFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        match t.as_str() {
            "bfloat16" | "bf16" => return Ok(FpFormat::BFLOAT16),
            "tensorfloat32" | "tf32" => return Ok(FpFormat::TENSORFLOAT32),
            "float32" | "float" | "f32" => return Ok(FpFormat::FLOAT32),
            _ => {}
        }
        let inner = t
            .strip_prefix("fp(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidFormat(format!("unrecognized format `{s}`")))?;
        let mut parts = inner.split(',');
        let parse = |p: Option<&str>| -> Result<u32> {
            p.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidFormat(format!("unrecognized format `{s}`")))
        };
        let n = parse(parts.next())?;
        let e = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::InvalidFormat(format!("unrecognized format `{s}`")));
        }
        FpFormat::new(n, e)
    }
}

impl TryFrom<String> for FpFormat {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FpFormat> for String {
    fn from(f: FpFormat) -> String {
        f.canonical()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoundingMode {
    /// Nearest, ties to even.
    #[serde(rename = "rn")]
    NearestEven,
    /// Nearest, ties away from zero.
    #[serde(rename = "ra")]
    NearestAway,
    #[serde(rename = "rz")]
    TowardZero,
    #[serde(rename = "ru")]
    TowardPositive,
    #[serde(rename = "rd")]
    TowardNegative,
    /// Round-to-odd: exact values stay, others go to the odd-encoded neighbor.
    #[serde(rename = "ro")]
    ToOdd,
}

impl RoundingMode {
    pub const IEEE: [RoundingMode; 5] = [
        RoundingMode::NearestEven,
        RoundingMode::NearestAway,
        RoundingMode::TowardZero,
        RoundingMode::TowardPositive,
        RoundingMode::TowardNegative,
    ];

    pub const ALL: [RoundingMode; 6] = [
        RoundingMode::NearestEven,
        RoundingMode::NearestAway,
        RoundingMode::TowardZero,
        RoundingMode::TowardPositive,
        RoundingMode::TowardNegative,
        RoundingMode::ToOdd,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            RoundingMode::NearestEven => "rn",
            RoundingMode::NearestAway => "ra",
            RoundingMode::TowardZero => "rz",
            RoundingMode::TowardPositive => "ru",
            RoundingMode::TowardNegative => "rd",
            RoundingMode::ToOdd => "ro",
        }
    }

    /// The mode to apply to `|x|` when `x` is negative.
    pub fn mirrored(&self) -> RoundingMode {
        match self {
            RoundingMode::TowardPositive => RoundingMode::TowardNegative,
            RoundingMode::TowardNegative => RoundingMode::TowardPositive,
            m => *m,
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<RoundingMode>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for RoundingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rn" => RoundingMode::NearestEven,
            "ra" => RoundingMode::NearestAway,
            "rz" => RoundingMode::TowardZero,
            "ru" => RoundingMode::TowardPositive,
            "rd" => RoundingMode::TowardNegative,
            "ro" => RoundingMode::ToOdd,
            _ => return Err(Error::InvalidMode(s.to_string())),
        })
    }
}

/// What round-to-odd does with magnitudes beyond the largest finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RoOverflow {
    /// Largest finite value, which always has an odd encoding.
    #[default]
    Saturate,
    Infinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FpClass {
    Zero,
    Subnormal,
    Normal,
    Infinite,
    NaN,
}

/// An encoding of a format as an unsigned integer of `n` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FpValue {
    pub format: FpFormat,
    pub bits: u64,
}

impl FpValue {
    pub fn new(format: FpFormat, bits: u64) -> Self {
        assert!(bits < format.encoding_count(), "encoding {bits:#x} out of range for {format}");
        FpValue { format, bits }
    }

    pub fn is_negative(&self) -> bool {
        self.bits & self.format.sign_mask() != 0
    }

    pub fn magnitude(&self) -> u64 {
        self.bits & self.format.magnitude_mask()
    }

    pub fn exponent_field(&self) -> u64 {
        self.magnitude() >> self.format.mantissa_bits()
    }

    pub fn mantissa_field(&self) -> u64 {
        self.bits & ((1u64 << self.format.mantissa_bits()) - 1)
    }

    pub fn class(&self) -> FpClass {
        let all_ones = (1u64 << self.format.exponent_bits) - 1;
        match (self.exponent_field(), self.mantissa_field()) {
            (0, 0) => FpClass::Zero,
            (0, _) => FpClass::Subnormal,
            (e, 0) if e == all_ones => FpClass::Infinite,
            (e, _) if e == all_ones => FpClass::NaN,
            _ => FpClass::Normal,
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self.class(), FpClass::Infinite | FpClass::NaN)
    }

    pub fn is_nan(&self) -> bool {
        self.class() == FpClass::NaN
    }

    pub fn is_zero(&self) -> bool {
        self.class() == FpClass::Zero
    }

    /// Encoding parity as an unsigned integer; both zeros are even.
    pub fn is_odd(&self) -> bool {
        self.bits & 1 == 1
    }

    /// Exact value; `-0` decodes to zero.
    pub fn decode(&self) -> ExactReal {
        let fmt = self.format;
        let mb = fmt.mantissa_bits() as i64;
        let v = match self.class() {
            FpClass::NaN => return ExactReal::NaN,
            FpClass::Infinite => {
                return if self.is_negative() { ExactReal::NegInf } else { ExactReal::PosInf };
            }
            FpClass::Zero => return ExactReal::zero(),
            FpClass::Subnormal => {
                mul_pow2(&BigRational::from_integer(BigInt::from(self.mantissa_field())), fmt.emin() - mb)
            }
            FpClass::Normal => {
                let sig = self.mantissa_field() | (1u64 << mb);
                let e = self.exponent_field() as i64 - fmt.bias();
                mul_pow2(&BigRational::from_integer(BigInt::from(sig)), e - mb)
            }
        };
        ExactReal::Finite(if self.is_negative() { -v } else { v })
    }

    /// Exact binary64 image of the value (every supported format embeds).
    pub fn to_f64(&self) -> f64 {
        let fmt = self.format;
        let mb = fmt.mantissa_bits() as i64;
        let mag = match self.class() {
            FpClass::NaN => return f64::NAN,
            FpClass::Infinite => f64::INFINITY,
            FpClass::Zero => 0.0,
            FpClass::Subnormal => crate::exact::scale_f64(self.mantissa_field() as f64, fmt.emin() - mb),
            FpClass::Normal => {
                let sig = self.mantissa_field() | (1u64 << mb);
                let e = self.exponent_field() as i64 - fmt.bias();
                crate::exact::scale_f64(sig as f64, e - mb)
            }
        };
        if self.is_negative() {
            -mag
        } else {
            mag
        }
    }

    /// Adjacent value toward +infinity.
    pub fn next_after(&self) -> FpValue {
        assert!(self.is_finite(), "next_after requires a finite value");
        let fmt = self.format;
        let bits = if self.is_zero() {
            1
        } else if self.is_negative() {
            let m = self.magnitude() - 1;
            if m == 0 {
                fmt.sign_mask()
            } else {
                m | fmt.sign_mask()
            }
        } else {
            self.bits + 1
        };
        FpValue { format: fmt, bits }
    }

    /// Adjacent value toward -infinity.
    pub fn prev_before(&self) -> FpValue {
        assert!(self.is_finite(), "prev_before requires a finite value");
        let fmt = self.format;
        let bits = if self.is_zero() {
            fmt.sign_mask() | 1
        } else if self.is_negative() {
            self.bits + 1
        } else {
            self.bits - 1
        };
        FpValue { format: fmt, bits }
    }

    pub fn hex(&self) -> String {
        let width = self.format.total_bits.div_ceil(4) as usize;
        format!("0x{:0width$x}", self.bits, width = width)
    }
}

impl fmt::Display for FpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.format, self.hex())
    }
}

/// Picks the magnitude encoding for a positive value whose truncated
/// encoding is `lo`. `half` compares the discarded fraction against one half
/// of the quantum.
fn select_magnitude(fmt: FpFormat, lo: u64, inexact: bool, half: Ordering, mode: RoundingMode, ro: RoOverflow) -> u64 {
    let up = if !inexact {
        false
    } else {
        match mode {
            RoundingMode::NearestEven => match half {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => lo & 1 == 1,
            },
            RoundingMode::NearestAway => half != Ordering::Less,
            RoundingMode::TowardZero | RoundingMode::TowardNegative => false,
            RoundingMode::TowardPositive => true,
            RoundingMode::ToOdd => lo & 1 == 0,
        }
    };
    let enc = lo.saturating_add(up as u64);
    let inf = fmt.inf_magnitude();
    if enc < inf && lo < inf {
        return enc;
    }
    // beyond the largest finite magnitude
    match mode {
        RoundingMode::NearestEven | RoundingMode::NearestAway | RoundingMode::TowardPositive => inf,
        RoundingMode::TowardZero | RoundingMode::TowardNegative => inf - 1,
        RoundingMode::ToOdd => match ro {
            RoOverflow::Saturate => inf - 1,
            RoOverflow::Infinity => inf,
        },
    }
}

/// Truncated magnitude encoding from the binary exponent `ex` of the value
/// and its integer significand `sig` at the format's quantum.
fn truncated_encoding(fmt: FpFormat, ex: i64, sig: u64) -> u64 {
    if ex < fmt.emin() {
        sig
    } else {
        ((ex - fmt.emin()) as u64) * (1u64 << fmt.mantissa_bits()) + sig
    }
}

/// Rounds an exact real into `fmt` under `mode`.
pub fn round_exact(x: &ExactReal, fmt: FpFormat, mode: RoundingMode) -> FpValue {
    round_exact_with(x, fmt, mode, RoOverflow::Saturate)
}

pub fn round_exact_with(x: &ExactReal, fmt: FpFormat, mode: RoundingMode, ro: RoOverflow) -> FpValue {
    let r = match x {
        ExactReal::NaN => return fmt.nan(),
        ExactReal::PosInf => return fmt.pos_inf(),
        ExactReal::NegInf => return fmt.neg_inf(),
        ExactReal::Finite(r) => r,
    };
    if r.is_zero() {
        return fmt.pos_zero();
    }
    let neg = r.is_negative();
    let a = r.abs();
    let m = if neg { mode.mirrored() } else { mode };
    let ex = floor_log2(&a);
    let mag = if ex > fmt.emax() + 1 {
        select_magnitude(fmt, fmt.inf_magnitude(), true, Ordering::Greater, m, ro)
    } else if ex < fmt.emin() - fmt.mantissa_bits() as i64 - 2 {
        // far below the smallest subnormal: truncates to zero, inexact, below half
        select_magnitude(fmt, 0, true, Ordering::Less, m, ro)
    } else {
        let s = ex.max(fmt.emin()) - fmt.mantissa_bits() as i64;
        let (q, half, inexact) = scaled_floor(&a, s);
        let sig = q.to_u64().expect("significand bounded by format precision");
        select_magnitude(fmt, truncated_encoding(fmt, ex, sig), inexact, half, m, ro)
    };
    FpValue { format: fmt, bits: if neg { mag | fmt.sign_mask() } else { mag } }
}

/// Fast path of [`round_exact`] for binary64 inputs; identical results.
pub fn round_f64(x: f64, fmt: FpFormat, mode: RoundingMode) -> FpValue {
    if x.is_nan() {
        return fmt.nan();
    }
    if x.is_infinite() {
        return if x > 0.0 { fmt.pos_inf() } else { fmt.neg_inf() };
    }
    if x == 0.0 {
        return fmt.pos_zero();
    }
    let neg = x < 0.0;
    let m = if neg { mode.mirrored() } else { mode };
    let bits = x.abs().to_bits();
    let exp_field = (bits >> 52) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e2) = if exp_field == 0 { (frac, -1074i64) } else { (frac | (1u64 << 52), exp_field - 1075) };
    let ex = e2 + 63 - mant.leading_zeros() as i64;
    let mag = if ex > fmt.emax() + 1 {
        select_magnitude(fmt, fmt.inf_magnitude(), true, Ordering::Greater, m, RoOverflow::Saturate)
    } else {
        let s = ex.max(fmt.emin()) - fmt.mantissa_bits() as i64;
        let sh = s - e2;
        let (sig, inexact, half) = if sh <= 0 {
            (mant << (-sh) as u32, false, Ordering::Less)
        } else if sh > 60 {
            (0, true, Ordering::Less)
        } else {
            let rem = mant & ((1u64 << sh) - 1);
            (mant >> sh, rem != 0, rem.cmp(&(1u64 << (sh - 1))))
        };
        select_magnitude(fmt, truncated_encoding(fmt, ex, sig), inexact, half, m, RoOverflow::Saturate)
    };
    FpValue { format: fmt, bits: if neg { mag | fmt.sign_mask() } else { mag } }
}

/// Midpoint of two finite values.
pub(crate) fn midpoint(a: &BigRational, b: &BigRational) -> BigRational {
    (a + b) / BigRational::from_integer(BigInt::from(2))
}

/// Largest finite value of the format as an exact rational.
pub fn max_finite_value(fmt: FpFormat) -> BigRational {
    let v = FpValue { format: fmt, bits: fmt.max_finite_magnitude() };
    v.decode().as_rational().cloned().expect("finite")
}

/// The value one quantum above the largest finite value (`2^(emax+1)`).
pub(crate) fn overflow_boundary(fmt: FpFormat) -> BigRational {
    pow2(fmt.emax() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::pow2;

    fn bf16() -> FpFormat {
        FpFormat::BFLOAT16
    }

    fn rat(x: BigRational) -> ExactReal {
        ExactReal::Finite(x)
    }

    #[test]
    fn format_parameters() {
        let f = bf16();
        assert_eq!(f.mantissa_bits(), 7);
        assert_eq!(f.bias(), 127);
        assert!(FpFormat::new(10, 9).is_err());
        assert!(FpFormat::new(10, 1).is_err());
        assert_eq!("fp(19,8)".parse::<FpFormat>().unwrap(), FpFormat::TENSORFLOAT32);
        assert_eq!("tensorfloat32".parse::<FpFormat>().unwrap(), FpFormat::new(19, 8).unwrap());
        assert_eq!("float32".parse::<FpFormat>().unwrap(), FpFormat::new(32, 8).unwrap());
        assert!("fp(19)".parse::<FpFormat>().is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(bf16().value(0x3F80).decode(), ExactReal::one());
        assert_eq!(bf16().value(0x0001).decode(), ExactReal::pow2(-133));
        let tf32 = FpFormat::TENSORFLOAT32;
        assert_eq!(tf32.value(0xFF << 10).decode(), ExactReal::PosInf);
        assert_eq!(tf32.value((0xFF << 10) | 1).decode(), ExactReal::NaN);
        assert_eq!(bf16().value(0xBF80).decode(), ExactReal::from_int(-1));
        assert_eq!(bf16().neg_zero().decode(), ExactReal::zero());
    }

    #[test]
    fn round_examples() {
        let one = BigRational::from_integer(1.into());
        let v = round_exact(&rat(&one + pow2(-9)), bf16(), RoundingMode::ToOdd);
        assert_eq!(v.bits, 0x3F81);
        let v = round_exact(&rat(one.clone()), bf16(), RoundingMode::ToOdd);
        assert_eq!(v.bits, 0x3F80);
        let v = round_exact(&rat(&one + pow2(-8)), bf16(), RoundingMode::NearestEven);
        assert_eq!(v.bits, 0x3F80);
        let v = round_exact(&rat(&one + pow2(-8)), bf16(), RoundingMode::NearestAway);
        assert_eq!(v.bits, 0x3F81);
    }

    #[test]
    fn overflow_behaviour() {
        let f = bf16();
        let huge = ExactReal::pow2(200);
        assert_eq!(round_exact(&huge, f, RoundingMode::NearestEven), f.pos_inf());
        assert_eq!(round_exact(&huge, f, RoundingMode::TowardZero).bits, f.max_finite_magnitude());
        let ro = round_exact(&huge, f, RoundingMode::ToOdd);
        assert_eq!(ro.bits, f.max_finite_magnitude());
        assert!(ro.is_odd());
        assert_eq!(round_exact_with(&huge, f, RoundingMode::ToOdd, RoOverflow::Infinity), f.pos_inf());
        let neg = round_exact(&huge.neg(), f, RoundingMode::TowardPositive);
        assert_eq!(neg.bits, f.max_finite_magnitude() | 0x8000);
        // exactly at the RN overflow threshold: tie goes to infinity
        let thr = max_finite_value(f) + pow2(127 - 8);
        assert_eq!(round_exact(&rat(thr), f, RoundingMode::NearestEven), f.pos_inf());
    }

    #[test]
    fn signed_zero_and_tiny() {
        let f = bf16();
        let tiny = ExactReal::pow2(-200).neg();
        assert_eq!(round_exact(&tiny, f, RoundingMode::TowardNegative).bits, 0x8001);
        assert_eq!(round_exact(&tiny, f, RoundingMode::TowardPositive), f.neg_zero());
        assert_eq!(round_exact(&tiny, f, RoundingMode::NearestEven), f.neg_zero());
        assert_eq!(round_exact(&ExactReal::zero(), f, RoundingMode::TowardNegative), f.pos_zero());
    }

    #[test]
    fn adjacency() {
        let f = bf16();
        assert_eq!(f.value(0x3F80).next_after().bits, 0x3F81);
        assert_eq!(f.neg_zero().next_after().bits, 0x0001);
        assert_eq!(f.value(0x0001).prev_before(), f.pos_zero());
        assert_eq!(f.pos_zero().prev_before().bits, 0x8001);
        assert_eq!(f.value(0x8001).next_after(), f.neg_zero());
        assert_eq!(f.value(f.max_finite_magnitude()).next_after(), f.pos_inf());
        assert_eq!(f.value(0x8000 | f.max_finite_magnitude()).prev_before(), f.neg_inf());
    }

    #[test]
    fn enumeration() {
        let f = FpFormat::new(10, 8).unwrap();
        assert_eq!(f.enumerate().unwrap().count(), 1024);
        let mut it = bf16().enumerate().unwrap();
        assert_eq!(it.next().unwrap().bits, 0);
        assert_eq!(bf16().enumerate().unwrap().count(), 65536);
        let err = FpFormat::FLOAT32.enumerate().err().unwrap();
        assert!(err.to_string().contains("cap"));
    }

    #[test]
    fn to_f64_matches_decode() {
        let f = FpFormat::new(12, 8).unwrap();
        for v in f.enumerate().unwrap().filter(|v| v.is_finite()) {
            assert_eq!(ExactReal::from_f64(v.to_f64()), v.decode(), "{v}");
        }
    }
}
