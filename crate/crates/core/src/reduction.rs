//! Range reduction, output compensation and its exact inverse.
//!
//! All six functions share two polynomial kernels:
//!
//! * logs: `x = m * 2^e` with `m` in `[1, 2)` and kernel variable
//!   `t = fl((m - 1) / (m + 1))` in `[0, 1/3)`; the kernel approximates
//!   `log2(m) = 2 atanh(t) / ln 2`, an odd function of `t`, and the output
//!   is `s = fl(P + e)`, followed for ln/log10 by a two-constant
//!   multiplication `s*K_hi + s*K_lo` with `K = ln 2` or `log10 2`.
//! * exps: `t = fl(x * L)` with `L` one of `1`, `fl(log2 e)`, `fl(log2 10)`,
//!   then `t = i + r` with `r` in `[-1/2, 1/2)`; the kernel approximates
//!   `2^r` and the output is `P * 2^i`.
//!
//! Inputs that no polynomial can serve (NaN, infinities, zero, exact
//! results, and exp arguments so small or large that the result is pinned)
//! go through [`special_value`] instead.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{f64_ceil, f64_floor, f64_to_rational, mul_pow2, pow2, scale_f64, ExactReal};
use crate::formats::FpValue;
use crate::oracle::{self, Bracket, FunctionId};

/// Relative error bound of the binary64 two-constant multiplication.
pub const LOG_COMPENSATION_ERROR_LOG2: i64 = -51;

/// Exp arguments with `|x| < 2^-42` give results pinned next to 1.
const EXP_TINY_LOG2: i32 = -42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recon {
    /// `x = m * 2^e`.
    Log { e: i64 },
    /// `x * log2(base) ≈ i + r`.
    Exp { i: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedInput {
    pub x_reduced: f64,
    pub recon: Recon,
}

/// A change-of-base constant: a 128-bit rational bracket and its binary64
/// head/tail split.
pub struct LogConstant {
    pub lo: BigRational,
    pub hi: BigRational,
    pub head: f64,
    pub tail: f64,
}

fn make_constant(b: Bracket) -> LogConstant {
    let Bracket::Interval { lo, hi } = b else { unreachable!("irrational constant") };
    let mid = (&lo + &hi) / BigRational::from_integer(BigInt::from(2));
    let head = crate::exact::rational_to_f64(&mid);
    let tail = crate::exact::rational_to_f64(&(&mid - f64_to_rational(head)));
    LogConstant { lo, hi, head, tail }
}

/// `ln 2` for ln, `log10 2` for log10.
pub fn log_constant(f: FunctionId) -> Option<&'static LogConstant> {
    static LN2: OnceLock<LogConstant> = OnceLock::new();
    static LOG10_2: OnceLock<LogConstant> = OnceLock::new();
    match f {
        FunctionId::Ln => Some(LN2.get_or_init(|| make_constant(oracle::bracket(FunctionId::Ln, &pow2(1), 1)))),
        FunctionId::Log10 => {
            Some(LOG10_2.get_or_init(|| make_constant(oracle::bracket(FunctionId::Log10, &pow2(1), 1))))
        }
        _ => None,
    }
}

/// Binary64 multiplier turning an exp argument into a base-2 exponent.
pub fn exp_scale(f: FunctionId) -> f64 {
    match f {
        FunctionId::Exp => std::f64::consts::LOG2_E,
        FunctionId::Exp10 => std::f64::consts::LOG2_10,
        _ => 1.0,
    }
}

fn powers_of_ten() -> &'static [f64; 23] {
    static P: OnceLock<[f64; 23]> = OnceLock::new();
    P.get_or_init(|| {
        let mut p = [1.0; 23];
        for k in 1..23 {
            p[k] = p[k - 1] * 10.0;
        }
        p
    })
}

/// Result for inputs handled outside the polynomial, valid for every format
/// with `exponent_bits` exponent bits and at most 38 significand bits, under
/// every rounding mode. Non-exact results are returned as representatives
/// that round identically to the true value.
pub fn special_value(f: FunctionId, x: f64, exponent_bits: u32) -> Option<ExactReal> {
    if x.is_nan() {
        return Some(ExactReal::NaN);
    }
    if f.is_log() {
        if x < 0.0 || x == f64::NEG_INFINITY {
            return Some(ExactReal::NaN);
        }
        if x == 0.0 {
            return Some(ExactReal::NegInf);
        }
        if x == f64::INFINITY {
            return Some(ExactReal::PosInf);
        }
        return match f {
            FunctionId::Log2 => {
                let (m, e) = frexp1(x);
                (m == 1.0).then(|| ExactReal::from_int(e))
            }
            FunctionId::Ln => (x == 1.0).then(ExactReal::zero),
            _ => powers_of_ten().iter().position(|p| *p == x).map(|k| ExactReal::from_int(k as i64)),
        };
    }
    if x == f64::INFINITY {
        return Some(ExactReal::PosInf);
    }
    if x == f64::NEG_INFINITY {
        return Some(ExactReal::zero());
    }
    if x == 0.0 {
        return Some(ExactReal::one());
    }
    if x.abs() < 2f64.powi(EXP_TINY_LOG2) {
        let d = pow2(-60);
        return Some(ExactReal::Finite(if x > 0.0 { BigRational::one() + d } else { BigRational::one() - d }));
    }
    if f == FunctionId::Exp10 && x >= 1.0 && x.fract() == 0.0 && x < 400.0 {
        let p = num_traits::pow(BigInt::from(10), x as usize);
        return Some(ExactReal::Finite(BigRational::from_integer(p)));
    }
    let bias = (1i64 << (exponent_bits - 1)) - 1;
    let t = x * exp_scale(f);
    if t >= (bias + 2) as f64 {
        return Some(ExactReal::pow2(bias + 2));
    }
    if t < (1 - bias - 42) as f64 {
        return Some(ExactReal::pow2(1 - bias - 64));
    }
    None
}

/// `x = m * 2^e` with `m` in `[1, 2)` for positive finite `x` (subnormals
/// are scaled up exactly first).
fn frexp1(x: f64) -> (f64, i64) {
    let (v, adj) = if x < f64::MIN_POSITIVE { (x * 2f64.powi(64), -64) } else { (x, 0) };
    let bits = v.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let m = f64::from_bits((bits & ((1u64 << 52) - 1)) | (1023u64 << 52));
    (m, e + adj)
}

/// Reduction of a finite in-domain binary64 input.
pub fn reduce_f64(f: FunctionId, x: f64) -> ReducedInput {
    if f.is_log() {
        let (m, e) = frexp1(x);
        ReducedInput { x_reduced: (m - 1.0) / (m + 1.0), recon: Recon::Log { e } }
    } else {
        let t = x * exp_scale(f);
        let mut i = t.floor();
        if t - i >= 0.5 {
            i += 1.0;
        }
        ReducedInput { x_reduced: t - i, recon: Recon::Exp { i: i as i64 } }
    }
}

pub fn range_reduce(f: FunctionId, x: FpValue) -> Result<ReducedInput> {
    let v = x.to_f64();
    if !f.in_domain(&x.decode()) {
        return Err(Error::Domain { function: f.name().into(), input: x.to_string() });
    }
    Ok(reduce_f64(f, v))
}

pub fn output_compensate(f: FunctionId, y: f64, recon: Recon) -> f64 {
    match recon {
        Recon::Log { e } => {
            let s = y + e as f64;
            match log_constant(f) {
                None => s,
                Some(k) => s * k.head + s * k.tail,
            }
        }
        Recon::Exp { i } => scale_f64(y, i),
    }
}

fn shift_rational(v: &ExactReal, delta: &BigRational) -> ExactReal {
    match v {
        ExactReal::Finite(r) => ExactReal::Finite(r + delta),
        other => other.clone(),
    }
}

fn scale_pow2(v: &ExactReal, e: i64) -> ExactReal {
    match v {
        ExactReal::Finite(r) => ExactReal::Finite(mul_pow2(r, e)),
        other => other.clone(),
    }
}

/// Bound on `s` so that `s*K*(1+θ)` stays on the right side of `bound` for
/// every `K` in the bracket and `|θ| <= 2^-51`.
fn divide_lower(l: &BigRational, k: &LogConstant) -> BigRational {
    let eps = pow2(LOG_COMPENSATION_ERROR_LOG2);
    let one = BigRational::one();
    if l.is_positive() {
        l / (&k.lo * (one - eps))
    } else if l.is_negative() {
        l / (&k.hi * (one + eps))
    } else {
        BigRational::zero()
    }
}

fn divide_upper(h: &BigRational, k: &LogConstant) -> BigRational {
    let eps = pow2(LOG_COMPENSATION_ERROR_LOG2);
    let one = BigRational::one();
    if h.is_positive() {
        h / (&k.hi * (one + eps))
    } else if h.is_negative() {
        h / (&k.lo * (one - eps))
    } else {
        BigRational::zero()
    }
}

/// Pulls a closed output interval `[lo, hi]` back to the reduced domain: any
/// binary64 kernel value inside the result compensates into `[lo, hi]`.
///
/// For log2 and the exps this is the exact inverse. For ln and log10 the
/// bounds are first shrunk by the compensation error and snapped inward to
/// binary64 (the intermediate `fl(P + e)` is a binary64 value).
pub fn invert_intervals(f: FunctionId, lo: &ExactReal, hi: &ExactReal, recon: Recon) -> Result<(ExactReal, ExactReal)> {
    let empty = || Error::EmptyInterval { input: format!("[{lo}, {hi}]") };
    if lo.partial_cmp_real(hi).is_none_or(|o| o.is_gt()) {
        return Err(empty());
    }
    let (l, h) = match recon {
        Recon::Log { e } => {
            let (sl, sh) = match log_constant(f) {
                None => (lo.clone(), hi.clone()),
                Some(k) => {
                    let sl = match lo {
                        ExactReal::Finite(r) => ExactReal::from_f64(f64_ceil(&divide_lower(r, k))),
                        other => other.clone(),
                    };
                    let sh = match hi {
                        ExactReal::Finite(r) => ExactReal::from_f64(f64_floor(&divide_upper(r, k))),
                        other => other.clone(),
                    };
                    (sl, sh)
                }
            };
            let minus_e = BigRational::from_integer(BigInt::from(-e));
            (shift_rational(&sl, &minus_e), shift_rational(&sh, &minus_e))
        }
        Recon::Exp { i } => (scale_pow2(lo, -i), scale_pow2(hi, -i)),
    };
    if l.partial_cmp_real(&h).is_none_or(|o| o.is_gt()) {
        return Err(empty());
    }
    Ok((l, h))
}

/// Reduced inputs all lie in `[0, 1/3)` for logs and `[-1/2, 1/2)` for exps.
pub fn reduced_domain(f: FunctionId) -> (f64, f64) {
    if f.is_log() {
        (0.0, 1.0 / 3.0)
    } else {
        (-0.5, 0.5)
    }
}
