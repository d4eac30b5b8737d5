//! Arbitrary-precision rationals extended with infinities and NaN.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An exact real value: a finite rational or one of the non-finite markers.
///
/// Arithmetic on finite values never rounds.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExactReal {
    Finite(BigRational),
    PosInf,
    NegInf,
    NaN,
}

impl ExactReal {
    pub fn zero() -> Self {
        ExactReal::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactReal::Finite(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        ExactReal::Finite(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        ExactReal::Finite(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `2^e` exactly.
    pub fn pow2(e: i64) -> Self {
        ExactReal::Finite(pow2(e))
    }

    /// Exact conversion of a binary64 value (`-0.0` maps to zero).
    pub fn from_f64(v: f64) -> Self {
        if v.is_nan() {
            ExactReal::NaN
        } else if v == f64::INFINITY {
            ExactReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExactReal::NegInf
        } else {
            ExactReal::Finite(f64_to_rational(v))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExactReal::Finite(_))
    }

    pub fn is_nan(&self) -> bool {
        matches!(self, ExactReal::NaN)
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExactReal::Finite(r) => Some(r),
            _ => None,
        }
    }

    /// Sign as -1, 0 or 1 (NaN reports 0).
    pub fn signum(&self) -> i32 {
        match self {
            ExactReal::Finite(r) => {
                if r.is_zero() {
                    0
                } else if r.is_negative() {
                    -1
                } else {
                    1
                }
            }
            ExactReal::PosInf => 1,
            ExactReal::NegInf => -1,
            ExactReal::NaN => 0,
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            ExactReal::Finite(r) => ExactReal::Finite(-r.clone()),
            ExactReal::PosInf => ExactReal::NegInf,
            ExactReal::NegInf => ExactReal::PosInf,
            ExactReal::NaN => ExactReal::NaN,
        }
    }

    /// Nearest binary64 value, ties to even, overflowing to infinity.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExactReal::Finite(r) => rational_to_f64(r),
            ExactReal::PosInf => f64::INFINITY,
            ExactReal::NegInf => f64::NEG_INFINITY,
            ExactReal::NaN => f64::NAN,
        }
    }

    /// Total order on non-NaN values; `None` if either side is NaN.
    pub fn partial_cmp_real(&self, other: &Self) -> Option<Ordering> {
        use ExactReal::*;
        match (self, other) {
            (NaN, _) | (_, NaN) => None,
            (Finite(a), Finite(b)) => Some(a.cmp(b)),
            (PosInf, PosInf) | (NegInf, NegInf) => Some(Ordering::Equal),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
        }
    }
}

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactReal::Finite(r) => write!(f, "{}", r),
            ExactReal::PosInf => write!(f, "+inf"),
            ExactReal::NegInf => write!(f, "-inf"),
            ExactReal::NaN => write!(f, "nan"),
        }
    }
}

impl From<BigRational> for ExactReal {
    fn from(r: BigRational) -> Self {
        ExactReal::Finite(r)
    }
}

pub fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << (e as usize))
    } else {
        BigRational::new_raw(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

/// `x * 2^e` exactly.
pub fn mul_pow2(x: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        BigRational::new(x.numer() << (e as usize), x.denom().clone())
    } else {
        BigRational::new(x.numer().clone(), x.denom() << ((-e) as usize))
    }
}

pub fn f64_to_rational(v: f64) -> BigRational {
    assert!(v.is_finite(), "non-finite binary64 has no rational value");
    if v == 0.0 {
        return BigRational::zero();
    }
    let bits = v.to_bits();
    let neg = bits >> 63 == 1;
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_field == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_field - 1075)
    };
    let m = BigInt::from(mant);
    let r = mul_pow2(&BigRational::from_integer(m), exp);
    if neg {
        -r
    } else {
        r
    }
}

/// `floor(log2(|x|))` for nonzero `x`.
pub fn floor_log2(x: &BigRational) -> i64 {
    debug_assert!(!x.is_zero());
    let n = x.numer().abs();
    let d = x.denom();
    let mut e = n.bits() as i64 - d.bits() as i64;
    // 2^e <= |x| < 2^(e+1) after adjustment
    if cmp_with_pow2(&n, d, e) == Ordering::Less {
        e -= 1;
    }
    e
}

/// Compares `n / d` with `2^e` (n, d positive).
fn cmp_with_pow2(n: &BigInt, d: &BigInt, e: i64) -> Ordering {
    if e >= 0 {
        n.cmp(&(d << (e as usize)))
    } else {
        (n << ((-e) as usize)).cmp(d)
    }
}

/// Splits positive `x * 2^-shift` into its integer part and the comparison of
/// the fractional part against one half. The bool reports a nonzero fraction.
pub(crate) fn scaled_floor(x: &BigRational, shift: i64) -> (BigInt, Ordering, bool) {
    let (a, b) = if shift <= 0 {
        (x.numer() << ((-shift) as usize), x.denom().clone())
    } else {
        (x.numer().clone(), x.denom() << (shift as usize))
    };
    let (q, r) = a.div_rem(&b);
    let half = (&r << 1usize).cmp(&b);
    (q, half, !r.is_zero())
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let a = r.abs();
    let e = floor_log2(&a);
    let v = if e > 1023 {
        f64::INFINITY
    } else {
        // quantum exponent of binary64 at this magnitude
        let s = e.max(-1022) - 52;
        let (q, half, _) = scaled_floor(&a, s);
        let mut q = q.to_u64().expect("significand fits in 64 bits");
        let round_up = match half {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => q & 1 == 1,
        };
        if round_up {
            q += 1;
        }
        // q <= 2^53, scaling by a power of two is exact in range
        let m = q as f64;
        scale_f64(m, s)
    };
    if neg {
        -v
    } else {
        v
    }
}

/// Smallest binary64 value `>= r` (may be `+inf`).
pub fn f64_ceil(r: &BigRational) -> f64 {
    let v = rational_to_f64(r);
    if v.is_finite() && f64_to_rational(v) < *r {
        v.next_up()
    } else if v == f64::NEG_INFINITY {
        -f64::MAX
    } else {
        v
    }
}

/// Largest binary64 value `<= r` (may be `-inf`).
pub fn f64_floor(r: &BigRational) -> f64 {
    -f64_ceil(&-r.clone())
}

/// `m * 2^e` in binary64 via repeated exact power-of-two scaling.
pub fn scale_f64(m: f64, mut e: i64) -> f64 {
    let mut v = m;
    while e > 1000 {
        v *= f64::from_bits(((1023 + 1000) as u64) << 52);
        e -= 1000;
    }
    while e < -1000 {
        // keep the intermediate normal as long as possible
        v *= f64::from_bits(((1023 - 1000) as u64) << 52);
        e += 1000;
    }
    v * f64::from_bits(((1023 + e) as u64) << 52)
}
