//! Correctly rounded reference values.
//!
//! Each function value is enclosed in a rational bracket computed with
//! fixed-point interval arithmetic (every partial sum rounded outward), then
//! both bracket ends are rounded into the target format. When they disagree
//! the working precision doubles, 64 → 128 → 256 → 512 bits, after which the
//! input is reported as undecidable instead of guessed.
//!
//! Exact results (log2 of powers of two, exp2 of integers, powers of ten for
//! log10/exp10, and the 0/1 fixed points) are recognised up front because no
//! bracket can ever certify them.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{floor_log2, mul_pow2, pow2, ExactReal};
use crate::formats::{round_exact, FpFormat, FpValue, RoundingMode};

/// Working precisions tried in order.
pub const PRECISION_SCHEDULE: [u32; 4] = [64, 128, 256, 512];

const GUARD_BITS: u32 = 40;

/// Beyond `|x * log2(base)| > 2^12` exp results are outside every supported
/// format's range and are represented by a far-away bracket.
const EXP_CLAMP: f64 = 4096.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionId {
    Log2,
    Ln,
    Log10,
    Exp2,
    Exp,
    Exp10,
}

impl FunctionId {
    pub const ALL: [FunctionId; 6] =
        [FunctionId::Log2, FunctionId::Ln, FunctionId::Log10, FunctionId::Exp2, FunctionId::Exp, FunctionId::Exp10];

    pub fn name(&self) -> &'static str {
        match self {
            FunctionId::Log2 => "log2",
            FunctionId::Ln => "ln",
            FunctionId::Log10 => "log10",
            FunctionId::Exp2 => "exp2",
            FunctionId::Exp => "exp",
            FunctionId::Exp10 => "exp10",
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, FunctionId::Log2 | FunctionId::Ln | FunctionId::Log10)
    }

    pub(crate) fn code(&self) -> u8 {
        *self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        FunctionId::ALL.get(c as usize).copied()
    }

    /// True when `x` lies in the mathematical domain (finite, and positive
    /// for the log family).
    pub fn in_domain(&self, x: &ExactReal) -> bool {
        match x {
            ExactReal::Finite(r) => !self.is_log() || r.is_positive(),
            _ => false,
        }
    }

    /// IEEE limit values for inputs outside the finite domain; `None` when
    /// the input needs a real evaluation.
    pub fn ieee_special(&self, x: &ExactReal) -> Option<ExactReal> {
        match x {
            ExactReal::NaN => Some(ExactReal::NaN),
            ExactReal::PosInf => Some(ExactReal::PosInf),
            ExactReal::NegInf => Some(if self.is_log() { ExactReal::NaN } else { ExactReal::zero() }),
            ExactReal::Finite(r) => {
                if self.is_log() {
                    if r.is_zero() {
                        Some(ExactReal::NegInf)
                    } else if r.is_negative() {
                        Some(ExactReal::NaN)
                    } else {
                        None
                    }
                } else if r.is_zero() {
                    Some(ExactReal::one())
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub value: FpValue,
    /// The real result equals `value` exactly.
    pub exact: bool,
}

/// Enclosure of a real function value.
#[derive(Clone, Debug, PartialEq)]
pub enum Bracket {
    Exact(ExactReal),
    /// `lo < f(x) < hi`.
    Interval { lo: BigRational, hi: BigRational },
}

/// `x` rounded toward -inf / +inf at `2^-s`.
fn fix_floor(x: &BigRational, s: u32) -> BigInt {
    (x.numer() << s as usize).div_floor(x.denom())
}

fn fix_ceil(x: &BigRational, s: u32) -> BigInt {
    -((-(x.numer() << s as usize)).div_floor(x.denom()))
}

fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

/// Bounds of `atanh(a/b) * 2^s` for `0 <= a/b <= 1/3`.
fn atanh_fix(a: &BigInt, b: &BigInt, s: u32, target: u32) -> (BigInt, BigInt) {
    let t = BigRational::new(a.clone(), b.clone());
    let t_lo = fix_floor(&t, s);
    let t_hi = fix_ceil(&t, s);
    let t2_lo = (&t_lo * &t_lo) >> s as usize;
    let t2_hi = div_ceil(&(&t_hi * &t_hi), &(BigInt::one() << s as usize));
    let (mut pw_lo, mut pw_hi) = (t_lo, t_hi);
    let (mut sum_lo, mut sum_hi) = (BigInt::zero(), BigInt::zero());
    let stop = BigInt::one() << (s.saturating_sub(target + 8)) as usize;
    let mut k: u64 = 0;
    loop {
        let d = BigInt::from(2 * k + 1);
        sum_lo += pw_lo.div_floor(&d);
        sum_hi += div_ceil(&pw_hi, &d);
        pw_lo = (&pw_lo * &t2_lo) >> s as usize;
        pw_hi = div_ceil(&(&pw_hi * &t2_hi), &(BigInt::one() << s as usize));
        k += 1;
        if pw_hi < stop {
            break;
        }
    }
    // remaining terms sum to at most pw * 9/8
    sum_hi += (&pw_hi * 9u32) / 8u32 + 1u32;
    (sum_lo, sum_hi)
}

/// Bounds of `exp(y * 2^-s) * 2^s` for a single fixed-point `y`, `|y| <= 2^s`.
fn exp_point_fix(y: &BigInt, s: u32, target: u32) -> (BigInt, BigInt) {
    let one = BigInt::one() << s as usize;
    let (mut t_lo, mut t_hi) = (one.clone(), one.clone());
    let (mut sum_lo, mut sum_hi) = (one.clone(), one);
    let stop = BigInt::one() << (s.saturating_sub(target + 8)) as usize;
    let mut k: u64 = 1;
    loop {
        let (a, b) = if y.is_negative() { (&t_hi * y, &t_lo * y) } else { (&t_lo * y, &t_hi * y) };
        let den = BigInt::from(k) << s as usize;
        t_lo = a.div_floor(&den);
        t_hi = div_ceil(&b, &den);
        sum_lo += &t_lo;
        sum_hi += &t_hi;
        k += 1;
        let mag = t_lo.abs().max(t_hi.abs());
        if mag < stop {
            // |tail| <= 2 * |last term| for |y| <= 1
            let tail = mag * 2u32 + 2u32;
            sum_lo -= &tail;
            sum_hi += tail;
            break;
        }
    }
    (sum_lo, sum_hi)
}

struct Constants {
    s: u32,
    ln2: (BigInt, BigInt),
    ln10: (BigInt, BigInt),
}

fn constants(level: usize) -> &'static Constants {
    static CONSTS: [OnceLock<Constants>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CONSTS[level].get_or_init(|| {
        let p = PRECISION_SCHEDULE[level];
        let s = p + GUARD_BITS;
        let (a_lo, a_hi) = atanh_fix(&BigInt::from(1), &BigInt::from(3), s, p + 8);
        let ln2 = (a_lo * 2u32, a_hi * 2u32);
        // ln 10 = 3 ln 2 + ln(5/4), ln(5/4) = 2 atanh(1/9)
        let (b_lo, b_hi) = atanh_fix(&BigInt::from(1), &BigInt::from(9), s, p + 8);
        let ln10 = (&ln2.0 * 3u32 + b_lo * 2u32, &ln2.1 * 3u32 + b_hi * 2u32);
        Constants { s, ln2, ln10 }
    })
}

/// Bounds of `ln(m) * 2^s` for `m` in `[1, 2)`.
fn ln_mantissa_fix(m: &BigRational, s: u32, p: u32) -> (BigInt, BigInt) {
    let a = m.numer() - m.denom();
    let b = m.numer() + m.denom();
    let (lo, hi) = atanh_fix(&a, &b, s, p + 8);
    (lo * 2u32, hi * 2u32)
}

/// Bounds of `ln(x) * 2^s` for positive `x`.
fn ln_fix(x: &BigRational, level: usize) -> (BigInt, BigInt) {
    let c = constants(level);
    let p = PRECISION_SCHEDULE[level];
    let e = floor_log2(x);
    let m = mul_pow2(x, -e);
    let (m_lo, m_hi) = ln_mantissa_fix(&m, c.s, p);
    let eb = BigInt::from(e);
    if e >= 0 {
        (m_lo + &eb * &c.ln2.0, m_hi + &eb * &c.ln2.1)
    } else {
        (m_lo + &eb * &c.ln2.1, m_hi + &eb * &c.ln2.0)
    }
}

/// Interval quotient `[a] / [c]` for positive `c`, in fixed point.
fn div_fix(a: &(BigInt, BigInt), c: &(BigInt, BigInt), s: u32) -> (BigInt, BigInt) {
    let lo_den = if a.0.is_negative() { &c.0 } else { &c.1 };
    let hi_den = if a.1.is_negative() { &c.1 } else { &c.0 };
    let lo = (&a.0 << s as usize).div_floor(lo_den);
    let hi = div_ceil(&(&a.1 << s as usize), hi_den);
    (lo, hi)
}

/// Bounds of `exp(y) * 2^s` for `y` in the fixed-point interval `[y_lo, y_hi]`.
/// `shift` must already have been applied so `|y| <= 1`.
fn exp_fix(y: &(BigInt, BigInt), s: u32, p: u32) -> (BigInt, BigInt) {
    let lo = exp_point_fix(&y.0, s, p).0;
    let hi = exp_point_fix(&y.1, s, p).1;
    (lo, hi)
}

fn to_bracket(b: (BigInt, BigInt), s: u32, offset: &BigRational, scale_pow2: i64) -> Bracket {
    let lo = BigRational::new(b.0, BigInt::one() << s as usize) + offset;
    let hi = BigRational::new(b.1, BigInt::one() << s as usize) + offset;
    Bracket::Interval { lo: mul_pow2(&lo, scale_pow2), hi: mul_pow2(&hi, scale_pow2) }
}

fn is_integer(x: &BigRational) -> bool {
    x.is_integer()
}

/// `10^k` exactly (k may be negative).
fn pow10(k: i64) -> BigRational {
    let p = num_traits::pow(BigInt::from(10), k.unsigned_abs() as usize);
    if k >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// `Some(k)` if `x == 10^k` for an integer `k >= 0`.
fn exact_power_of_ten(x: &BigRational) -> Option<i64> {
    if !x.is_integer() || !x.is_positive() {
        return None;
    }
    let mut n = x.to_integer();
    let ten = BigInt::from(10);
    let mut k = 0;
    while !n.is_one() {
        let (q, r) = n.div_rem(&ten);
        if !r.is_zero() {
            return None;
        }
        n = q;
        k += 1;
    }
    Some(k)
}

/// Far-away bracket standing in for an exp result beyond every format.
fn clamped(big: bool) -> Bracket {
    if big {
        Bracket::Interval { lo: pow2(4096), hi: pow2(4097) }
    } else {
        Bracket::Interval { lo: pow2(-4097), hi: pow2(-4096) }
    }
}

/// Exact result when one exists, independent of working precision.
pub fn exact_value(f: FunctionId, x: &BigRational) -> Option<BigRational> {
    match f {
        FunctionId::Log2 => {
            let e = floor_log2(x);
            (mul_pow2(x, -e).is_one()).then(|| BigRational::from_integer(BigInt::from(e)))
        }
        FunctionId::Ln => x.is_one().then(BigRational::zero),
        FunctionId::Log10 => exact_power_of_ten(x).map(|k| BigRational::from_integer(BigInt::from(k))),
        FunctionId::Exp2 => {
            if is_integer(x) {
                let k = x.to_integer().to_i64()?;
                (k.unsigned_abs() <= 4096).then(|| pow2(k))
            } else {
                None
            }
        }
        FunctionId::Exp => x.is_zero().then(BigRational::one),
        FunctionId::Exp10 => {
            if is_integer(x) {
                let k = x.to_integer().to_i64()?;
                (k.unsigned_abs() <= 1300).then(|| pow10(k))
            } else {
                None
            }
        }
    }
}

/// Encloses `f(x)` for finite in-domain `x` at the given schedule level.
pub fn bracket(f: FunctionId, x: &BigRational, level: usize) -> Bracket {
    if let Some(v) = exact_value(f, x) {
        return Bracket::Exact(ExactReal::Finite(v));
    }
    let c = constants(level);
    let p = PRECISION_SCHEDULE[level];
    let s = c.s;
    let zero = BigRational::zero();
    match f {
        FunctionId::Log2 => {
            let e = floor_log2(x);
            let m = mul_pow2(x, -e);
            let lm = ln_mantissa_fix(&m, s, p);
            let q = div_fix(&lm, &c.ln2, s);
            to_bracket(q, s, &BigRational::from_integer(BigInt::from(e)), 0)
        }
        FunctionId::Ln => to_bracket(ln_fix(x, level), s, &zero, 0),
        FunctionId::Log10 => {
            let q = div_fix(&ln_fix(x, level), &c.ln10, s);
            to_bracket(q, s, &zero, 0)
        }
        FunctionId::Exp2 | FunctionId::Exp | FunctionId::Exp10 => {
            let approx = x.to_f64().unwrap_or(f64::NAN);
            let scale = match f {
                FunctionId::Exp2 => 1.0,
                FunctionId::Exp => std::f64::consts::LOG2_E,
                _ => std::f64::consts::LOG2_10,
            };
            let t = approx * scale;
            if t > EXP_CLAMP {
                return clamped(true);
            }
            if t < -EXP_CLAMP {
                return clamped(false);
            }
            let i = t.round() as i64;
            let ib = BigInt::from(i);
            // y = x * ln(base) in fixed point, then r = y - i ln 2
            let y: (BigInt, BigInt) = match f {
                FunctionId::Exp2 => {
                    if x.is_negative() {
                        (fix_floor(&(x * BigRational::from_integer(c.ln2.1.clone())), 0) , div_ceil(&(x.numer() * &c.ln2.0), x.denom()))
                    } else {
                        (fix_floor(&(x * BigRational::from_integer(c.ln2.0.clone())), 0), div_ceil(&(x.numer() * &c.ln2.1), x.denom()))
                    }
                }
                FunctionId::Exp => (fix_floor(x, s), fix_ceil(x, s)),
                _ => {
                    if x.is_negative() {
                        ((x.numer() * &c.ln10.1).div_floor(x.denom()), div_ceil(&(x.numer() * &c.ln10.0), x.denom()))
                    } else {
                        ((x.numer() * &c.ln10.0).div_floor(x.denom()), div_ceil(&(x.numer() * &c.ln10.1), x.denom()))
                    }
                }
            };
            let r = if i >= 0 {
                (y.0 - &ib * &c.ln2.1, y.1 - &ib * &c.ln2.0)
            } else {
                (y.0 - &ib * &c.ln2.0, y.1 - &ib * &c.ln2.1)
            };
            let e = exp_fix(&r, s, p);
            to_bracket(e, s, &zero, i)
        }
    }
}

/// One function evaluation that can be rounded into several formats and
/// modes, escalating precision only when some rounding is ambiguous.
pub struct Evaluation {
    f: FunctionId,
    input: ExactReal,
    level: usize,
    bracket: Bracket,
}

impl Evaluation {
    pub fn new(f: FunctionId, x: &ExactReal) -> Result<Self> {
        let bracket = match f.ieee_special(x) {
            Some(ExactReal::NaN) => {
                return Err(Error::Domain { function: f.name().into(), input: x.to_string() });
            }
            Some(v) => Bracket::Exact(v),
            None => bracket(f, x.as_rational().expect("finite"), 0),
        };
        Ok(Evaluation { f, input: x.clone(), level: 0, bracket })
    }

    /// The true value when it is known exactly.
    pub fn exact(&self) -> Option<&ExactReal> {
        match &self.bracket {
            Bracket::Exact(v) => Some(v),
            _ => None,
        }
    }

    pub fn bracket(&self) -> &Bracket {
        &self.bracket
    }

    pub fn round(&mut self, fmt: FpFormat, mode: RoundingMode) -> Result<OracleResult> {
        loop {
            match &self.bracket {
                Bracket::Exact(v) => {
                    let value = round_exact(v, fmt, mode);
                    let exact = value.decode() == *v;
                    return Ok(OracleResult { value, exact });
                }
                Bracket::Interval { lo, hi } => {
                    let a = round_exact(&ExactReal::Finite(lo.clone()), fmt, mode);
                    let b = round_exact(&ExactReal::Finite(hi.clone()), fmt, mode);
                    if a == b {
                        return Ok(OracleResult { value: a, exact: false });
                    }
                }
            }
            if self.level + 1 >= PRECISION_SCHEDULE.len() {
                return Err(Error::OracleUndecided {
                    function: self.f.name().into(),
                    input: self.input.to_string(),
                    precision: PRECISION_SCHEDULE[self.level],
                });
            }
            self.level += 1;
            let x = self.input.as_rational().expect("finite").clone();
            self.bracket = bracket(self.f, &x, self.level);
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }
}

/// `f(x)` correctly rounded into `(fmt, mode)`.
pub fn oracle_round(f: FunctionId, x: FpValue, fmt: FpFormat, mode: RoundingMode) -> Result<OracleResult> {
    Evaluation::new(f, &x.decode())?.round(fmt, mode)
}

/// Rounds `f(x)` and also reports the final working precision used.
pub fn oracle_round_traced(f: FunctionId, x: &ExactReal, fmt: FpFormat, mode: RoundingMode) -> Result<(OracleResult, u32)> {
    let mut ev = Evaluation::new(f, x)?;
    let r = ev.round(fmt, mode)?;
    Ok((r, PRECISION_SCHEDULE[ev.level()]))
}

/// IEEE result for any encoding: NaN for out-of-domain inputs, the oracle
/// otherwise.
pub fn oracle_or_special(f: FunctionId, x: FpValue, fmt: FpFormat, mode: RoundingMode) -> Result<OracleResult> {
    let v = x.decode();
    if let Some(ExactReal::NaN) = f.ieee_special(&v) {
        return Ok(OracleResult { value: fmt.nan(), exact: false });
    }
    Evaluation::new(f, &v)?.round(fmt, mode)
}

/// Results for every encoding of `fmt`, in ascending encoding order.
pub fn oracle_table(f: FunctionId, fmt: FpFormat, mode: RoundingMode) -> Result<Vec<(FpValue, OracleResult)>> {
    let inputs: Vec<FpValue> = fmt.enumerate()?.collect();
    inputs.into_par_iter().map(|x| oracle_or_special(f, x, fmt, mode).map(|r| (x, r))).collect()
}

const CACHE_MAGIC: &[u8; 4] = b"PPOC";
pub const CACHE_VERSION: u8 = 1;

/// On-disk table of oracle results for one `(function, format, mode)`.
///
/// Layout (little-endian): magic `PPOC`, version byte, function code,
/// total bits, exponent bits, mode code, then one record per encoding in
/// ascending order: input encoding then output encoding, each padded to
/// `ceil(n / 8)` bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCache {
    pub function: FunctionId,
    pub format: FpFormat,
    pub mode: RoundingMode,
    pub outputs: Vec<u64>,
}

fn mode_code(m: RoundingMode) -> u8 {
    RoundingMode::ALL.iter().position(|x| *x == m).unwrap() as u8
}

impl OracleCache {
    pub fn build(f: FunctionId, fmt: FpFormat, mode: RoundingMode) -> Result<Self> {
        let table = oracle_table(f, fmt, mode)?;
        Ok(OracleCache { function: f, format: fmt, mode, outputs: table.into_iter().map(|(_, r)| r.value.bits).collect() })
    }

    pub fn file_name(f: FunctionId, fmt: FpFormat, mode: RoundingMode) -> String {
        format!("{}_fp{}_{}_{}.v{}.bin", f.name(), fmt.total_bits(), fmt.exponent_bits(), mode.short_name(), CACHE_VERSION)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&[
            CACHE_VERSION,
            self.function.code(),
            self.format.total_bits() as u8,
            self.format.exponent_bits() as u8,
            mode_code(self.mode),
        ])?;
        let width = self.format.total_bits().div_ceil(8) as usize;
        for (input, out) in self.outputs.iter().enumerate() {
            w.write_all(&(input as u64).to_le_bytes()[..width])?;
            w.write_all(&out.to_le_bytes()[..width])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut head = [0u8; 9];
        r.read_exact(&mut head)?;
        if &head[..4] != CACHE_MAGIC {
            return Err(Error::Artifact("oracle cache: bad magic".into()));
        }
        if head[4] != CACHE_VERSION {
            return Err(Error::Artifact(format!("oracle cache: unsupported version {}", head[4])));
        }
        let function =
            FunctionId::from_code(head[5]).ok_or_else(|| Error::Artifact("oracle cache: bad function".into()))?;
        let format = FpFormat::new(head[6] as u32, head[7] as u32)?;
        let mode = *RoundingMode::ALL
            .get(head[8] as usize)
            .ok_or_else(|| Error::Artifact("oracle cache: bad mode".into()))?;
        let width = format.total_bits().div_ceil(8) as usize;
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() != 2 * width * format.encoding_count() as usize {
            return Err(Error::Artifact("oracle cache: truncated".into()));
        }
        let read = |chunk: &[u8]| {
            let mut b = [0u8; 8];
            b[..width].copy_from_slice(chunk);
            u64::from_le_bytes(b)
        };
        let mut outputs = Vec::with_capacity(format.encoding_count() as usize);
        for (i, rec) in buf.chunks_exact(2 * width).enumerate() {
            if read(&rec[..width]) != i as u64 {
                return Err(Error::Artifact(format!("oracle cache: record {i} out of order")));
            }
            outputs.push(read(&rec[width..]));
        }
        Ok(OracleCache { function, format, mode, outputs })
    }

    /// Loads the cached table from `dir`, building and storing it if absent.
    pub fn load_or_build(dir: &Path, f: FunctionId, fmt: FpFormat, mode: RoundingMode) -> Result<Self> {
        let path = dir.join(Self::file_name(f, fmt, mode));
        if path.exists() {
            if let Ok(c) = Self::read(&path) {
                if c.function == f && c.format == fmt && c.mode == mode {
                    return Ok(c);
                }
            }
        }
        let c = Self::build(f, fmt, mode)?;
        std::fs::create_dir_all(dir)?;
        c.write(&path)?;
        Ok(c)
    }

    pub fn lookup(&self, x: FpValue) -> FpValue {
        self.format.value(self.outputs[x.bits as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmt21() -> FpFormat {
        FpFormat::new(21, 8).unwrap()
    }

    fn val(v: f64, fmt: FpFormat) -> FpValue {
        crate::formats::round_f64(v, fmt, RoundingMode::NearestEven)
    }

    #[test]
    fn exact_points() {
        let f21 = fmt21();
        let r = oracle_round(FunctionId::Log2, val(4.0, f21), f21, RoundingMode::ToOdd).unwrap();
        assert!(r.exact);
        assert_eq!(r.value.to_f64(), 2.0);
        let r = oracle_round(FunctionId::Exp, val(0.0, f21), FpFormat::BFLOAT16, RoundingMode::NearestEven).unwrap();
        assert!(r.exact);
        assert_eq!(r.value.to_f64(), 1.0);
        for f in [FunctionId::Ln, FunctionId::Log10] {
            let r = oracle_round(f, val(1.0, f21), f21, RoundingMode::NearestEven).unwrap();
            assert!(r.exact);
            assert!(r.value.is_zero());
        }
        let r = oracle_round(FunctionId::Log10, val(1000.0, f21), f21, RoundingMode::ToOdd).unwrap();
        assert!(r.exact);
        assert_eq!(r.value.to_f64(), 3.0);
    }

    #[test]
    fn constants_bracket_known_values() {
        for (level, &bits) in PRECISION_SCHEDULE.iter().enumerate().take(4) {
            let c = constants(level);
            let lo = BigRational::new(c.ln2.0.clone(), BigInt::one() << c.s as usize);
            let hi = BigRational::new(c.ln2.1.clone(), BigInt::one() << c.s as usize);
            assert!(lo < hi);
            assert!(lo.to_f64().unwrap() <= std::f64::consts::LN_2 + 1e-16);
            assert!(hi.to_f64().unwrap() >= std::f64::consts::LN_2 - 1e-16);
            let w = (&hi - &lo).to_f64().unwrap();
            assert!(w < 2f64.powi(-(bits.min(900) as i32)), "level {level} width {w}");
        }
    }

    #[test]
    fn brackets_contain_libm_values() {
        let cases: [(FunctionId, f64, f64); 6] = [
            (FunctionId::Log2, 3.0, 3f64.log2()),
            (FunctionId::Ln, 0.3, 0.3f64.ln()),
            (FunctionId::Log10, 7.5, 7.5f64.log10()),
            (FunctionId::Exp2, -3.3, (-3.3f64).exp2()),
            (FunctionId::Exp, 2.7, 2.7f64.exp()),
            (FunctionId::Exp10, -1.25, 10f64.powf(-1.25)),
        ];
        for (f, x, want) in cases {
            let b = bracket(f, &crate::exact::f64_to_rational(x), 0);
            let Bracket::Interval { lo, hi } = b else { panic!("{f} exact?") };
            let (lo, hi) = (lo.to_f64().unwrap(), hi.to_f64().unwrap());
            assert!(lo <= hi);
            assert!((lo - want).abs() <= want.abs() * 1e-14, "{f}({x}) lo {lo} want {want}");
            assert!((hi - want).abs() <= want.abs() * 1e-14, "{f}({x}) hi {hi} want {want}");
        }
    }

    #[test]
    fn log2_three_round_to_odd() {
        let f21 = fmt21();
        let r = oracle_round(FunctionId::Log2, val(3.0, f21), f21, RoundingMode::ToOdd).unwrap();
        assert!(!r.exact);
        assert!(r.value.is_odd());
        let v = r.value.to_f64();
        assert!((v - 3f64.log2()).abs() < 2f64.powi(-12));
    }

    #[test]
    fn specials() {
        let bf = FpFormat::BFLOAT16;
        let r = oracle_or_special(FunctionId::Log2, bf.pos_zero(), bf, RoundingMode::NearestEven).unwrap();
        assert_eq!(r.value, bf.neg_inf());
        let r = oracle_or_special(FunctionId::Log2, bf.pos_inf(), bf, RoundingMode::NearestEven).unwrap();
        assert_eq!(r.value, bf.pos_inf());
        let r = oracle_or_special(FunctionId::Ln, bf.nan(), bf, RoundingMode::NearestEven).unwrap();
        assert!(r.value.is_nan());
        assert!(oracle_round(FunctionId::Ln, val(-1.0, bf), bf, RoundingMode::NearestEven).is_err());
        let r = oracle_or_special(FunctionId::Exp2, bf.neg_inf(), bf, RoundingMode::NearestEven).unwrap();
        assert_eq!(r.value, bf.pos_zero());
        let r = oracle_or_special(FunctionId::Exp, val(1.0e30, bf), bf, RoundingMode::TowardZero).unwrap();
        assert_eq!(r.value.bits, bf.max_finite_magnitude());
        let r = oracle_or_special(FunctionId::Exp10, val(-1.0e30, bf), bf, RoundingMode::TowardPositive).unwrap();
        assert_eq!(r.value.bits, 1);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let fmt = FpFormat::new(10, 8).unwrap();
        let c = OracleCache::load_or_build(dir.path(), FunctionId::Log2, fmt, RoundingMode::ToOdd).unwrap();
        assert_eq!(c.outputs.len(), 1024);
        let path = dir.path().join(OracleCache::file_name(FunctionId::Log2, fmt, RoundingMode::ToOdd));
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 9 + 1024 * 4);
        let back = OracleCache::read(&path).unwrap();
        assert_eq!(back, c);
    }
}
