//! Rounding intervals and the progressive constraint system.
//!
//! Every input of every ladder format contributes one constraint on the
//! kernel value at its reduced input: the set of binary64 kernel outputs
//! that still compensate and round to the right answer. Rungs with the
//! round-to-odd interval mode use the odd-rounded result at two extra bits,
//! which makes one constraint correct for all five IEEE modes at once.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{f64_ceil, f64_floor, ExactReal};
use crate::formats::{overflow_boundary, midpoint, FpFormat, FpValue, RoundingMode};
use crate::oracle::{oracle_round, FunctionId};
use crate::reduction::{invert_intervals, reduce_f64, special_value};

/// How a rung derives its rounding intervals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalMode {
    /// Round-to-odd at two extra mantissa bits: correct under all five modes.
    #[default]
    #[serde(rename = "ro")]
    RoundToOdd,
    /// Round-to-nearest-even in the rung's own format.
    #[serde(rename = "rn-only")]
    NearestOnly,
}

impl IntervalMode {
    /// Format and mode in which the oracle result is taken.
    pub fn interval_format(&self, fmt: FpFormat) -> Result<(FpFormat, RoundingMode)> {
        match self {
            IntervalMode::RoundToOdd => Ok((fmt.widened(2)?, RoundingMode::ToOdd)),
            IntervalMode::NearestOnly => Ok((fmt, RoundingMode::NearestEven)),
        }
    }

    /// Modes for which results derived from this interval mode are correct.
    pub fn guaranteed_modes(&self) -> &'static [RoundingMode] {
        match self {
            IntervalMode::RoundToOdd => &RoundingMode::IEEE,
            IntervalMode::NearestOnly => &[RoundingMode::NearestEven],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LadderRung {
    pub format: FpFormat,
    pub terms: usize,
    #[serde(default)]
    pub interval: IntervalMode,
}

/// Checks ordering, shared exponent width and nondecreasing term counts.
pub fn validate_ladder(ladder: &[LadderRung]) -> Result<()> {
    let first = ladder.first().ok_or_else(|| Error::InvalidLadder("empty ladder".into()))?;
    for w in ladder.windows(2) {
        if w[1].format.total_bits() <= w[0].format.total_bits() {
            return Err(Error::InvalidLadder("rungs must be in strictly ascending bitwidth".into()));
        }
        if w[1].terms < w[0].terms {
            return Err(Error::InvalidLadder("term counts must not decrease with bitwidth".into()));
        }
    }
    for r in ladder {
        if r.format.exponent_bits() != first.format.exponent_bits() {
            return Err(Error::InvalidLadder("all rungs must share one exponent width".into()));
        }
        if r.terms == 0 {
            return Err(Error::InvalidLadder("term counts must be positive".into()));
        }
    }
    Ok(())
}

/// The set of reals that round to one value. Infinite endpoints are always
/// reported open.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingInterval {
    pub lower: ExactReal,
    pub upper: ExactReal,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl RoundingInterval {
    fn new(lower: ExactReal, lower_open: bool, upper: ExactReal, upper_open: bool) -> Self {
        let lower_open = lower_open || !lower.is_finite();
        let upper_open = upper_open || !upper.is_finite();
        RoundingInterval { lower, upper, lower_open, upper_open }
    }

    pub fn contains(&self, x: &ExactReal) -> bool {
        let Some(lo) = x.partial_cmp_real(&self.lower) else { return false };
        let Some(hi) = x.partial_cmp_real(&self.upper) else { return false };
        (lo.is_gt() || (lo.is_eq() && !self.lower_open)) && (hi.is_lt() || (hi.is_eq() && !self.upper_open))
    }

    /// Closed binary64 bounds of the binary64 values inside the interval.
    pub fn binary64_bounds(&self) -> (f64, f64) {
        let lo = match &self.lower {
            ExactReal::Finite(r) => {
                if self.lower_open {
                    f64_floor(r).next_up()
                } else {
                    f64_ceil(r)
                }
            }
            _ => f64::NEG_INFINITY,
        };
        let hi = match &self.upper {
            ExactReal::Finite(r) => {
                if self.upper_open {
                    f64_ceil(r).next_down()
                } else {
                    f64_floor(r)
                }
            }
            _ => f64::INFINITY,
        };
        (lo, hi)
    }
}

/// Midpoint, with an infinite neighbor standing for the overflow boundary.
fn mid(a: &ExactReal, b: &ExactReal, fmt: FpFormat) -> ExactReal {
    let bound = overflow_boundary(fmt);
    let fin = |x: &ExactReal| match x {
        ExactReal::Finite(r) => r.clone(),
        ExactReal::PosInf => bound.clone(),
        ExactReal::NegInf => -bound.clone(),
        ExactReal::NaN => unreachable!("NaN neighbor"),
    };
    ExactReal::Finite(midpoint(&fin(a), &fin(b)))
}

/// Exact set of reals that `round_exact(·, fmt, mode)` maps to `y`. Both
/// zeros are treated as the single real zero.
pub fn rounding_interval(y: FpValue, fmt: FpFormat, mode: RoundingMode) -> RoundingInterval {
    use RoundingMode::*;
    if !y.is_finite() {
        assert!(!y.is_nan(), "NaN has no rounding interval");
        let max = fmt.value(fmt.max_finite_magnitude());
        let pos = !y.is_negative();
        let edge = |v: FpValue| if pos { v } else { fmt.value(v.bits | (1u64 << (fmt.total_bits() - 1))) };
        let m = edge(max).decode();
        let threshold = mid(&m, &y.decode(), fmt);
        let (bound, open) = match (mode, pos) {
            (NearestEven | NearestAway, _) => (threshold, false),
            _ => (m, true),
        };
        return if pos {
            RoundingInterval::new(bound, open, ExactReal::PosInf, true)
        } else {
            RoundingInterval::new(ExactReal::NegInf, true, bound, open)
        };
    }
    let v = y.decode();
    let a = y.prev_before().decode();
    let b = y.next_after().decode();
    let sign = v.signum();
    match mode {
        NearestEven => {
            let closed = !y.is_odd();
            RoundingInterval::new(mid(&a, &v, fmt), !closed, mid(&v, &b, fmt), !closed)
        }
        NearestAway => {
            RoundingInterval::new(mid(&a, &v, fmt), sign <= 0, mid(&v, &b, fmt), sign >= 0)
        }
        TowardZero => match sign {
            1 => RoundingInterval::new(v, false, b, true),
            -1 => RoundingInterval::new(a, true, v, false),
            _ => RoundingInterval::new(a, true, b, true),
        },
        TowardPositive => RoundingInterval::new(a, true, v, false),
        TowardNegative => RoundingInterval::new(v, false, b, true),
        ToOdd => {
            if y.is_odd() {
                RoundingInterval::new(a, true, b, true)
            } else {
                RoundingInterval::new(v.clone(), false, v, false)
            }
        }
    }
}

/// One original `(rung, input)` pair behind a constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub rung: usize,
    /// Input encoding in the rung's format.
    pub input: u64,
    /// Oracle result in the rung's interval format, as binary64.
    pub result: f64,
    /// This input's own reduced-domain interval.
    pub lower: f64,
    pub upper: f64,
}

/// `P_{term_count}(x) ∈ [lower, upper]`, evaluated in binary64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalConstraint {
    pub x: f64,
    pub lower: f64,
    pub upper: f64,
    pub term_count: usize,
    pub weight: u64,
    pub origins: Vec<Origin>,
}

impl IntervalConstraint {
    pub fn satisfied_by(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub function: FunctionId,
    pub ladder: Vec<LadderRung>,
    pub k_max: usize,
    pub constraints: Vec<IntervalConstraint>,
    /// Inputs no polynomial can serve: empty reduced intervals and merge
    /// conflicts.
    pub forced: Vec<Origin>,
    pub conflicts: usize,
}

impl ConstraintSet {
    pub fn exponent_bits(&self) -> u32 {
        self.ladder[0].format.exponent_bits()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Number of `(rung, input)` pairs represented.
    pub fn origin_count(&self) -> usize {
        self.constraints.iter().map(|c| c.origins.len()).sum()
    }

    /// Sum of weights: the size of the logical constraint multiset.
    pub fn total_weight(&self) -> u128 {
        self.constraints.iter().map(|c| c.weight as u128).sum()
    }

    /// Same constraints with term counts taken from `terms` (one per rung)
    /// and split back into one constraint per origin.
    pub fn with_terms(&self, terms: &[usize]) -> ConstraintSet {
        let constraints = self
            .constraints
            .iter()
            .flat_map(|c| {
                c.origins.iter().map(move |o| IntervalConstraint {
                    x: c.x,
                    lower: o.lower,
                    upper: o.upper,
                    term_count: terms[o.rung],
                    weight: 1,
                    origins: vec![*o],
                })
            })
            .collect();
        let ladder = self.ladder.iter().zip(terms).map(|(r, &t)| LadderRung { terms: t, ..*r }).collect();
        ConstraintSet {
            function: self.function,
            ladder,
            k_max: terms.iter().copied().max().unwrap_or(self.k_max),
            constraints,
            forced: self.forced.clone(),
            conflicts: 0,
        }
    }

    /// JSON-lines dump, binary64 fields as hex bit patterns.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.constraints {
            let line = serde_json::json!({
                "x": hex64(c.x),
                "lower": hex64(c.lower),
                "upper": hex64(c.upper),
                "terms": c.term_count,
                "weight": c.weight,
                "origins": c.origins.iter().map(|o| serde_json::json!({
                    "rung": o.rung,
                    "input": format!("{:#x}", o.input),
                    "result": hex64(o.result),
                    "lower": hex64(o.lower),
                    "upper": hex64(o.upper),
                })).collect::<Vec<_>>(),
            });
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads constraints written by [`ConstraintSet::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<IntervalConstraint>> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(&line)?;
            let bad = || Error::Artifact(format!("malformed constraint line: {line}"));
            let f = |v: &serde_json::Value, k: &str| v.get(k).and_then(|s| s.as_str()).and_then(parse_hex64).ok_or_else(bad);
            let u = |v: &serde_json::Value, k: &str| v.get(k).and_then(|s| s.as_u64()).ok_or_else(bad);
            let mut origins = Vec::new();
            for o in v.get("origins").and_then(|o| o.as_array()).ok_or_else(bad)? {
                let input = o
                    .get("input")
                    .and_then(|s| s.as_str())
                    .and_then(|s| u64::from_str_radix(s.trim_start_matches("0x"), 16).ok())
                    .ok_or_else(bad)?;
                origins.push(Origin {
                    rung: u(o, "rung")? as usize,
                    input,
                    result: f(o, "result")?,
                    lower: f(o, "lower")?,
                    upper: f(o, "upper")?,
                });
            }
            out.push(IntervalConstraint {
                x: f(&v, "x")?,
                lower: f(&v, "lower")?,
                upper: f(&v, "upper")?,
                term_count: u(&v, "terms")? as usize,
                weight: u(&v, "weight")?,
                origins,
            });
        }
        Ok(out)
    }
}

pub fn hex64(v: f64) -> String {
    format!("{:#018x}", v.to_bits())
}

pub fn parse_hex64(s: &str) -> Option<f64> {
    let t = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    u64::from_str_radix(t, 16).ok().map(f64::from_bits)
}

enum Built {
    Skip,
    Constraint(f64, Origin),
    Forced(Origin),
}

fn build_one(f: FunctionId, rung_index: usize, rung: &LadderRung, x: FpValue) -> Result<Built> {
    let fmt = rung.format;
    if !x.is_finite() {
        return Ok(Built::Skip);
    }
    let v = x.to_f64();
    if special_value(f, v, fmt.exponent_bits()).is_some() {
        return Ok(Built::Skip);
    }
    let (ifmt, imode) = rung.interval.interval_format(fmt)?;
    let y = oracle_round(f, x, ifmt, imode)?.value;
    let mut origin = Origin { rung: rung_index, input: x.bits, result: y.to_f64(), lower: 1.0, upper: 0.0 };
    let (lo_out, hi_out) = rounding_interval(y, ifmt, imode).binary64_bounds();
    if lo_out > hi_out {
        return Ok(Built::Forced(origin));
    }
    let red = reduce_f64(f, v);
    let Ok((l, h)) = invert_intervals(f, &ExactReal::from_f64(lo_out), &ExactReal::from_f64(hi_out), red.recon) else {
        return Ok(Built::Forced(origin));
    };
    let lo = l.as_rational().map_or(f64::NEG_INFINITY, f64_ceil);
    let hi = h.as_rational().map_or(f64::INFINITY, f64_floor);
    origin.lower = lo;
    origin.upper = hi;
    if lo > hi {
        return Ok(Built::Forced(origin));
    }
    Ok(Built::Constraint(red.x_reduced, origin))
}

/// One constraint per finite, polynomial-served input of every rung, in rung
/// then encoding order. Not merged.
pub fn build_progressive_constraints(f: FunctionId, ladder: &[LadderRung], k_max: usize) -> Result<ConstraintSet> {
    validate_ladder(ladder)?;
    if ladder.iter().any(|r| r.terms > k_max) {
        return Err(Error::InvalidLadder(format!("a rung uses more than k_max = {k_max} terms")));
    }
    let mut constraints = Vec::new();
    let mut forced = Vec::new();
    for (j, rung) in ladder.iter().enumerate() {
        let inputs: Vec<FpValue> = rung.format.enumerate()?.collect();
        let built: Vec<Built> = inputs.into_par_iter().map(|x| build_one(f, j, rung, x)).collect::<Result<_>>()?;
        for b in built {
            match b {
                Built::Skip => {}
                Built::Forced(o) => forced.push(o),
                Built::Constraint(x, o) => constraints.push(IntervalConstraint {
                    x,
                    lower: o.lower,
                    upper: o.upper,
                    term_count: rung.terms,
                    weight: 1,
                    origins: vec![o],
                }),
            }
        }
    }
    Ok(ConstraintSet { function: f, ladder: ladder.to_vec(), k_max, constraints, forced, conflicts: 0 })
}

/// Intersects constraints sharing `(x, term_count)`, keeping the maximum
/// weight. When the intersection is empty the group counts as a conflict:
/// the origins containing the most popular point are kept and the rest move
/// to the forced special cases.
pub fn merge_duplicate_inputs(cs: ConstraintSet) -> ConstraintSet {
    let mut groups: BTreeMap<(u64, usize), Vec<IntervalConstraint>> = BTreeMap::new();
    for c in cs.constraints {
        groups.entry((order_key(c.x), c.term_count)).or_default().push(c);
    }
    let mut constraints = Vec::with_capacity(groups.len());
    let mut forced = cs.forced;
    let mut conflicts = 0;
    for (_, group) in groups {
        let weight = group.iter().map(|c| c.weight).max().unwrap_or(1);
        let x = group[0].x;
        let term_count = group[0].term_count;
        let mut origins: Vec<Origin> = group.into_iter().flat_map(|c| c.origins).collect();
        let lower = origins.iter().map(|o| o.lower).fold(f64::NEG_INFINITY, f64::max);
        let upper = origins.iter().map(|o| o.upper).fold(f64::INFINITY, f64::min);
        if lower <= upper {
            constraints.push(IntervalConstraint { x, lower, upper, term_count, weight, origins });
            continue;
        }
        conflicts += 1;
        let covering = |p: f64| origins.iter().filter(|o| o.lower <= p && p <= o.upper).count();
        let mut best = (0, f64::NAN);
        for o in &origins {
            let c = covering(o.lower);
            if c > best.0 || (c == best.0 && o.lower < best.1) {
                best = (c, o.lower);
            }
        }
        let p = best.1;
        let (keep, drop): (Vec<Origin>, Vec<Origin>) =
            origins.drain(..).partition(|o| o.lower <= p && p <= o.upper);
        forced.extend(drop);
        let lower = keep.iter().map(|o| o.lower).fold(f64::NEG_INFINITY, f64::max);
        let upper = keep.iter().map(|o| o.upper).fold(f64::INFINITY, f64::min);
        constraints.push(IntervalConstraint { x, lower, upper, term_count, weight, origins: keep });
    }
    ConstraintSet { constraints, forced, conflicts: cs.conflicts + conflicts, ..cs }
}

/// Order-preserving integer key of a binary64 value (`-0` joins `+0`).
fn order_key(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1u64 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{f64_to_rational, pow2};
    use crate::formats::round_exact;
    use num_rational::BigRational;
    use num_traits::Signed;
    use rand::{Rng, SeedableRng};

    fn bf16() -> FpFormat {
        FpFormat::BFLOAT16
    }

    #[test]
    fn ro_intervals() {
        let f21 = FpFormat::new(21, 8).unwrap();
        let two = round_exact(&ExactReal::from_int(2), f21, RoundingMode::ToOdd);
        let i = rounding_interval(two, f21, RoundingMode::ToOdd);
        assert_eq!(i.lower, ExactReal::from_int(2));
        assert_eq!(i.upper, ExactReal::from_int(2));
        assert!(!i.lower_open && !i.upper_open);
        let odd = f21.value(two.bits + 1);
        let i = rounding_interval(odd, f21, RoundingMode::ToOdd);
        assert_eq!(i.lower, two.decode());
        assert_eq!(i.upper, f21.value(two.bits + 2).decode());
        assert!(i.lower_open && i.upper_open);
    }

    #[test]
    fn rn_interval_of_one_in_bfloat16() {
        let i = rounding_interval(bf16().value(0x3F80), bf16(), RoundingMode::NearestEven);
        let one = BigRational::from_integer(1.into());
        assert_eq!(i.lower, ExactReal::Finite(&one - pow2(-9)));
        assert_eq!(i.upper, ExactReal::Finite(&one + pow2(-8)));
        assert!(!i.lower_open && !i.upper_open);
    }

    /// Rationals straddling each endpoint agree with `round_exact`.
    fn check_interval_against_rounding(y: FpValue, mode: RoundingMode) {
        let fmt = y.format;
        let i = rounding_interval(y, fmt, mode);
        let mut probes = Vec::new();
        for e in [&i.lower, &i.upper] {
            if let ExactReal::Finite(r) = e {
                let scale = if r == &BigRational::from_integer(0.into()) { pow2(-140) } else { r.abs() * pow2(-30) };
                for d in [-2i64, -1, 0, 1, 2] {
                    probes.push(ExactReal::Finite(r + &scale * BigRational::from_integer(d.into())));
                }
            }
        }
        for p in probes {
            let got = round_exact(&p, fmt, mode);
            let same = got == y || (got.is_zero() && y.is_zero());
            assert_eq!(same, i.contains(&p), "{y} {mode} probe {p}");
        }
    }

    #[test]
    fn intervals_match_rounding_on_small_format() {
        let fmt = FpFormat::new(10, 4).unwrap();
        for y in fmt.enumerate().unwrap().filter(|v| v.is_finite()) {
            for mode in RoundingMode::ALL {
                check_interval_against_rounding(y, mode);
            }
        }
    }

    #[test]
    fn intervals_match_rounding_on_random_bfloat16() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let y = bf16().value(rng.random_range(0..0x10000));
            if y.is_finite() {
                for mode in RoundingMode::ALL {
                    check_interval_against_rounding(y, mode);
                }
            }
        }
    }

    #[test]
    fn infinite_results() {
        let i = rounding_interval(bf16().pos_inf(), bf16(), RoundingMode::NearestEven);
        assert!(!i.lower_open);
        assert_eq!(round_exact(&i.lower, bf16(), RoundingMode::NearestEven), bf16().pos_inf());
        let i = rounding_interval(bf16().neg_inf(), bf16(), RoundingMode::TowardNegative);
        assert!(i.upper_open);
    }

    #[test]
    fn binary64_bounds_stay_inside_open_ends() {
        let f21 = FpFormat::new(21, 8).unwrap();
        let y = f21.value(round_exact(&ExactReal::from_f64(1.5849625), f21, RoundingMode::ToOdd).bits);
        assert!(y.is_odd());
        let i = rounding_interval(y, f21, RoundingMode::ToOdd);
        let (lo, hi) = i.binary64_bounds();
        assert!(i.contains(&ExactReal::from_f64(lo)) && i.contains(&ExactReal::from_f64(hi)));
        assert!(!i.contains(&ExactReal::from_f64(lo.next_down())));
        assert!(!i.contains(&ExactReal::from_f64(hi.next_up())));
        assert!(f64_to_rational(lo) > *i.lower.as_rational().unwrap());
    }

    fn ladder() -> Vec<LadderRung> {
        vec![
            LadderRung { format: FpFormat::new(10, 8).unwrap(), terms: 2, interval: IntervalMode::RoundToOdd },
            LadderRung { format: FpFormat::new(12, 8).unwrap(), terms: 3, interval: IntervalMode::RoundToOdd },
        ]
    }

    #[test]
    fn log2_constraint_counts_and_specials() {
        let cs = build_progressive_constraints(FunctionId::Log2, &ladder(), 3).unwrap();
        // positive finite nonzero inputs minus the exact powers of two
        let expect = |n: u32| {
            let mb = n as u64 - 9;
            (1u64 << (n - 1)) - (1 << mb) - 1 - 254 - mb
        };
        let per_rung = |j: usize| cs.constraints.iter().filter(|c| c.origins[0].rung == j).count() as u64
            + cs.forced.iter().filter(|o| o.rung == j).count() as u64;
        assert_eq!(per_rung(0), expect(10));
        assert_eq!(per_rung(1), expect(12));
    }

    #[test]
    fn soundness_of_reduced_intervals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for f in [FunctionId::Log2, FunctionId::Ln, FunctionId::Exp2, FunctionId::Exp10] {
            let cs = build_progressive_constraints(f, &ladder(), 3).unwrap();
            for _ in 0..200 {
                let c = &cs.constraints[rng.random_range(0..cs.len())];
                let o = c.origins[0];
                let rung = cs.ladder[o.rung];
                let x = rung.format.value(o.input);
                let red = reduce_f64(f, x.to_f64());
                assert_eq!(red.x_reduced, c.x);
                for p in [c.lower, c.upper] {
                    if !p.is_finite() {
                        continue;
                    }
                    let out = crate::reduction::output_compensate(f, p, red.recon);
                    for mode in RoundingMode::IEEE {
                        let got = crate::formats::round_f64(out, rung.format, mode);
                        let want = oracle_round(f, x, rung.format, mode).unwrap().value;
                        assert_eq!(got, want, "{f} {x} {mode}");
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_nesting_between_rungs() {
        let cs = build_progressive_constraints(FunctionId::Log2, &ladder(), 3).unwrap();
        let small: std::collections::HashMap<u64, &Origin> = cs
            .constraints
            .iter()
            .map(|c| &c.origins[0])
            .filter(|o| o.rung == 0)
            .map(|o| (ladder()[0].format.value(o.input).to_f64().to_bits(), o))
            .collect();
        let mut checked = 0;
        for c in &cs.constraints {
            let o = &c.origins[0];
            if o.rung != 1 {
                continue;
            }
            let v = ladder()[1].format.value(o.input).to_f64();
            if let Some(s) = small.get(&v.to_bits()) {
                assert!(s.lower <= o.lower && o.upper <= s.upper, "input {v}");
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn merge_examples() {
        let o = Origin { rung: 0, input: 0, result: 0.0, lower: 0.0, upper: 0.0 };
        let mk = |x: f64, lo: f64, hi: f64, w: u64| IntervalConstraint {
            x,
            lower: lo,
            upper: hi,
            term_count: 2,
            weight: w,
            origins: vec![Origin { lower: lo, upper: hi, ..o }],
        };
        let cs = ConstraintSet {
            function: FunctionId::Log2,
            ladder: ladder(),
            k_max: 3,
            constraints: vec![
                mk(1.5, 0.58, 0.59, 1),
                mk(1.5, 0.584, 0.595, 2),
                mk(1.25, 0.3, 0.3, 1),
                mk(1.25, 0.3, 0.3, 1),
                mk(1.75, 0.1, 0.2, 1),
                mk(1.75, 0.3, 0.4, 1),
            ],
            forced: vec![],
            conflicts: 0,
        };
        let m = merge_duplicate_inputs(cs);
        assert_eq!(m.constraints.len(), 3);
        assert_eq!((m.constraints[0].x, m.constraints[0].lower, m.constraints[0].upper), (1.25, 0.3, 0.3));
        assert_eq!(m.constraints[0].weight, 1);
        assert_eq!(m.constraints[0].origins.len(), 2);
        assert_eq!((m.constraints[1].lower, m.constraints[1].upper, m.constraints[1].weight), (0.584, 0.59, 2));
        // disjoint pair: one side survives, the other is forced
        assert_eq!(m.conflicts, 1);
        assert_eq!(m.forced.len(), 1);
        assert_eq!((m.constraints[2].lower, m.constraints[2].upper), (0.1, 0.2));
    }

    #[test]
    fn jsonl_round_trip() {
        let cs = merge_duplicate_inputs(build_progressive_constraints(FunctionId::Exp2, &ladder(), 3).unwrap());
        let mut buf = Vec::new();
        cs.write_jsonl(&mut buf).unwrap();
        let back = ConstraintSet::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back.len(), cs.len());
        for (a, b) in back.iter().zip(&cs.constraints) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.lower.to_bits(), b.lower.to_bits());
            assert_eq!(a.upper.to_bits(), b.upper.to_bits());
            assert_eq!(a.origins.len(), b.origins.len());
        }
    }
}
